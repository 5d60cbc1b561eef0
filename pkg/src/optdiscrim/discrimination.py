"""Minimum-error discrimination: preparations, measurements and solvers."""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernel, linalg
from .errors import NoConvergence, NotCovariant, SystemMismatch, TooLarge, UnsupportedModel
from .kernel import ExtendedProcess, System
from .lp import simplex
from .models import CONE_TOL, devectorize, is_quantum, quantum_dims, vectorize

log = logging.getLogger(__name__)

NORM_TOL = 1e-10
CERT_TOL = 1e-8
BRUTE_FORCE_BUDGET = 200_000


@dataclass(frozen=True, eq=False)
class StatePreparation:
    """Subnormalized states rho_m = xi_m rho_m^N, stored as rows of ``states``."""

    system: System
    states: np.ndarray

    def __post_init__(self):
        s = np.array(self.states, dtype=float, ndmin=2)
        if s.shape[1] != self.system.dim:
            raise SystemMismatch(f"states of length {s.shape[1]} for system of dim {self.system.dim}")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @classmethod
    def from_priors(cls, system: System, priors, normalized_states) -> "StatePreparation":
        priors = np.asarray(priors, dtype=float)
        normalized_states = np.asarray(normalized_states, dtype=float)
        return cls(system, priors[:, None] * normalized_states)

    @property
    def M(self) -> int:
        return self.states.shape[0]

    @property
    def model(self):
        return self.system.model

    @property
    def priors(self) -> np.ndarray:
        return self.states @ self.model.unit_effect()

    @property
    def matrix(self) -> np.ndarray:
        """Process C -> A: column m is rho_m."""
        return self.states.T

    def as_process(self) -> ExtendedProcess:
        return ExtendedProcess(kernel.classical(self.M), self.system, self.matrix)

    def problems(self, tol: float = NORM_TOL) -> list[str]:
        out = []
        for m, s in enumerate(self.states):
            if not self.model.contains_state(s, tol):
                out.append(f"state {m} is not in the state cone")
        total = float(self.priors.sum())
        if abs(total - 1.0) > tol:
            out.append(f"preparation not normalized: sum of priors is {total!r}")
        return out

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        return not self.problems(tol)


@dataclass(frozen=True, eq=False)
class Measurement:
    """Effects e_m as rows of ``effects``."""

    system: System
    effects: np.ndarray

    def __post_init__(self):
        e = np.array(self.effects, dtype=float, ndmin=2)
        if e.shape[1] != self.system.dim:
            raise SystemMismatch(f"effects of length {e.shape[1]} for system of dim {self.system.dim}")
        e.setflags(write=False)
        object.__setattr__(self, "effects", e)

    @property
    def M(self) -> int:
        return self.effects.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.effects

    def as_process(self) -> ExtendedProcess:
        return ExtendedProcess(self.system, kernel.classical(self.M), self.effects)

    def effect_list(self) -> list[ExtendedProcess]:
        return kernel.process_to_effects(self.as_process())

    def is_valid(self, tol: float = kernel.DET_TOL) -> bool:
        return kernel.is_measurement(self.effect_list(), tol=tol)

    def normalization_residual(self) -> float:
        return float(np.max(np.abs(self.effects.sum(axis=0) - self.system.model.unit_effect())))

    @classmethod
    def guess(cls, system: System, M: int, m: int) -> "Measurement":
        """Always answer ``m``."""
        e = np.zeros((M, system.dim))
        e[m] = system.model.unit_effect()
        return cls(system, e)


@dataclass
class SolveReport:
    measurement: Measurement
    value: float
    method: str
    iterations: int = 0
    dual_bound: float | None = None
    gap: float | None = None
    covariant: bool = False
    converged: bool = True
    notes: dict = field(default_factory=dict)


def success_probability(e: Measurement, rho: StatePreparation) -> float:
    if not e.system.same_as(rho.system):
        raise SystemMismatch(f"measurement on {e.system} but states on {rho.system}")
    if e.M != rho.M:
        raise SystemMismatch(f"{e.M} outcomes for {rho.M} states")
    return float(np.sum(e.effects * rho.states))


def confusion_matrix(e: Measurement, rho: StatePreparation) -> np.ndarray:
    """Entry (m, n) is <e_m | rho_n>."""
    return kernel.compose_seq(rho.as_process(), e.as_process()).matrix


def _report(e: Measurement, rho: StatePreparation, method: str, **kw) -> SolveReport:
    return SolveReport(e, success_probability(e, rho), method, **kw)


# ---------------------------------------------------------------------------
# Polyhedral models


def _require_polyhedral(rho: StatePreparation) -> np.ndarray:
    if not rho.model.polyhedral:
        raise UnsupportedModel(f"{rho.model!r} is not polyhedral; use solve_quantum")
    return rho.model.effect_generators()


def _lp_columns(rho: StatePreparation):
    gens = _require_polyhedral(rho)
    M, k = rho.M, len(gens)
    A = np.tile(gens.T, (1, M))  # column (m, j) = w_j
    c = (rho.states @ gens.T).reshape(-1)  # <w_j, rho_m>
    return gens, A, c, M, k


def _effects_from_weights(gens, x, M) -> np.ndarray:
    return x.reshape(M, len(gens)) @ gens


def solve_lp(rho: StatePreparation) -> SolveReport:
    _require_polyhedral(rho)
    if rho.M == 1:
        return _report(Measurement.guess(rho.system, 1, 0), rho, "lp")
    gens, A, c, M, _ = _lp_columns(rho)
    res = simplex(c, A, rho.model.unit_effect())
    if res.status != "optimal":
        raise RuntimeError(f"measurement LP returned {res.status}")
    e = Measurement(rho.system, _effects_from_weights(gens, res.x, M))
    return _report(e, rho, "lp", iterations=res.iterations)


def brute_force_oracle(rho: StatePreparation, budget: int = BRUTE_FORCE_BUDGET) -> SolveReport:
    """Exact optimum by enumerating basic feasible solutions of the measurement polytope."""
    gens, A, c, M, _ = _lp_columns(rho)
    b = rho.model.unit_effect()
    rank = np.linalg.matrix_rank(A)
    # drop dependent rows so square subsystems are well posed
    piv = _row_basis(A)
    A_r, b_r = A[piv], b[piv]
    ncols = A.shape[1]
    count = _ncomb(ncols, rank)
    if count > budget:
        raise TooLarge(f"{count} column subsets exceed the enumeration budget {budget}")
    best_val, best_x, visited = -np.inf, None, 0
    for subset in itertools.combinations(range(ncols), rank):
        visited += 1
        sub = A_r[:, subset]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        xs = np.linalg.solve(sub, b_r)
        if np.any(xs < -1e-12):
            continue
        x = np.zeros(ncols)
        x[list(subset)] = np.clip(xs, 0.0, None)
        if np.max(np.abs(A @ x - b)) > 1e-9:
            continue
        val = float(c @ x)
        if val > best_val + 1e-15:
            best_val, best_x = val, x
    if best_x is None:
        raise RuntimeError("no vertex of the measurement polytope found")
    e = Measurement(rho.system, _effects_from_weights(gens, best_x, M))
    return _report(e, rho, "bruteforce", iterations=visited)


def _row_basis(A: np.ndarray) -> list[int]:
    """Indices of a maximal independent set of rows, chosen greedily."""
    piv: list[int] = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[piv + [i]]) > len(piv):
            piv.append(i)
    return piv


def _ncomb(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)


# ---------------------------------------------------------------------------
# Quantum models


@dataclass
class DualCertificate:
    """Y = Herm(sum_m e_m rho_m). ``bound`` is Tr Y when Y >= rho_m for all m,
    otherwise infinite; ``shifted_bound`` = Tr(Y + t I) is always a valid bound."""

    bound: float
    feasible: bool
    shifted_bound: float
    min_slack: float
    Y: np.ndarray = field(repr=False)


def _as_operators(rows: np.ndarray, dims) -> list[np.ndarray]:
    return [devectorize(r, dims) for r in rows]


def dual_certificate(e: Measurement, rho: StatePreparation, tol: float = CERT_TOL) -> DualCertificate:
    if not is_quantum(rho.model):
        raise UnsupportedModel("dual certificates are implemented for quantum models")
    if not e.system.same_as(rho.system):
        raise SystemMismatch("measurement and preparation live on different systems")
    dims = quantum_dims(rho.model)
    return _certificate(_as_operators(e.effects, dims), _as_operators(rho.states, dims), tol)


def _certificate(effs, rhos, tol: float = CERT_TOL) -> DualCertificate:
    Y = linalg.herm_part(sum(ek @ rk for ek, rk in zip(effs, rhos)))
    slack = min(linalg.min_eigenvalue(Y - r) for r in rhos)
    n = Y.shape[0]
    trace = float(np.real(np.trace(Y)))
    feasible = slack >= -tol
    shifted = trace + n * max(0.0, -slack)
    return DualCertificate(trace if feasible else float("inf"), feasible, shifted, slack, Y)


def _initial_point(rhos, priors, eps: float = 1e-3):
    """Prior-weighted identity split nudged toward the pretty-good measurement."""
    n = rhos[0].shape[0]
    ident = np.eye(n)
    s_inv, proj = linalg.pinv_sqrt(sum(rhos))
    M = len(rhos)
    out = []
    for r, xi in zip(rhos, priors):
        pgm = s_inv @ r @ s_inv + (ident - proj) / M
        out.append(linalg.herm_part((1.0 - eps) * xi * ident + eps * pgm))
    return out


def _fixed_point_step(rhos, effs):
    lam = linalg.herm_part(sum(r @ e @ r for r, e in zip(rhos, effs)))
    l_inv, proj = linalg.pinv_sqrt(lam)
    n = lam.shape[0]
    M = len(rhos)
    fill = (np.eye(n) - proj) / M
    return [linalg.herm_part(l_inv @ r @ e @ r @ l_inv) + fill for r, e in zip(rhos, effs)]


def _iterate_quantum(rhos, effs, tol, max_iter, step=None):
    step = step or _fixed_point_step
    cert = _certificate(effs, rhos)
    best = (cert.shifted_bound - _ps(effs, rhos), effs, cert)
    it = 0
    while best[0] >= tol and it < max_iter:
        effs = step(rhos, effs)
        it += 1
        cert = _certificate(effs, rhos)
        gap = cert.shifted_bound - _ps(effs, rhos)
        if gap < best[0]:
            best = (gap, effs, cert)
    return best, it


def _ps(effs, rhos) -> float:
    return float(sum(np.real(np.trace(e @ r)) for e, r in zip(effs, rhos)))


def _quantum_report(rho, effs, cert, method, it, tol) -> SolveReport:
    dims = quantum_dims(rho.model)
    e = Measurement(rho.system, np.array([vectorize(x, dims) for x in effs]))
    rep = _report(e, rho, method, iterations=it)
    rep.dual_bound = cert.bound if cert.feasible else cert.shifted_bound
    rep.gap = rep.dual_bound - rep.value
    rep.converged = rep.gap < tol
    rep.notes["certificate_feasible"] = cert.feasible
    rep.notes["min_slack"] = cert.min_slack
    return rep


def solve_quantum(rho: StatePreparation, tol: float = 1e-10, max_iter: int = 10_000) -> SolveReport:
    """Fixed-point iteration e_m <- L^-1/2 rho_m e_m rho_m L^-1/2 with a dual stopping test."""
    if not is_quantum(rho.model):
        raise UnsupportedModel("solve_quantum needs a quantum model")
    if tol <= 0:
        raise ValueError("tol must be positive")
    dims = quantum_dims(rho.model)
    rhos = _as_operators(rho.states, dims)
    if rho.M == 1:
        effs = [np.eye(rhos[0].shape[0], dtype=complex)]
        return _quantum_report(rho, effs, _certificate(effs, rhos), "fixedpoint", 0, tol)
    effs = _initial_point(rhos, rho.priors)
    (gap, effs, cert), it = _iterate_quantum(rhos, effs, tol, max_iter)
    rep = _quantum_report(rho, effs, cert, "fixedpoint", it, tol)
    if not rep.converged:
        raise NoConvergence(f"gap {rep.gap:.3e} after {it} iterations", rep)
    return rep


# ---------------------------------------------------------------------------
# Dispatch and the covariant reduction


def solve(rho: StatePreparation, method: str = "auto", tol: float = 1e-10, max_iter: int = 10_000, setup=None):
    if method == "auto":
        method = "lp" if rho.model.polyhedral else "fixedpoint"
    if method == "lp":
        return solve_lp(rho)
    if method == "bruteforce":
        return brute_force_oracle(rho)
    if method == "fixedpoint":
        return solve_quantum(rho, tol, max_iter)
    if method == "covariant":
        if setup is None:
            raise ValueError("covariant solver needs a symmetry setup")
        return solve_covariant(rho, setup, tol, max_iter)
    raise ValueError(f"unknown solver {method!r}")


def solve_covariant(rho: StatePreparation, setup, tol: float = 1e-10, max_iter: int = 10_000) -> SolveReport:
    """Optimize a single seed effect; the other outcomes are transported by the group.

    Under the conventions of :mod:`optdiscrim.symmetry` a covariant
    measurement satisfies e_{tau_g(0)} = e_0 P_{g^-1}, so every e_m is fixed
    by e_0 and a transversal {g_m : tau_{g_m}(0) = m}.
    """
    from . import symmetry

    if not symmetry.is_covariant_preparation(rho, setup):
        raise NotCovariant("state preparation is not covariant under the supplied setup")
    transversal = symmetry.transversal(setup.tau, 0)
    if transversal is None:
        warnings.warn("outcome action is not transitive; falling back to the unrestricted solver", stacklevel=2)
        rep = solve(rho, "auto", tol, max_iter)
        rep.notes["fallback"] = "not transitive"
        return rep
    P = setup.pibar.maps
    G = setup.group
    transports = [P[G.inverse[g]] for g in transversal]  # e_m = e_0 @ transports[m]
    stabilizer = [h for h in range(G.order) if setup.tau.perms[h][0] == 0 and h != G.identity]

    if rho.model.polyhedral:
        rep = _covariant_lp(rho, transports, [P[G.inverse[h]] for h in stabilizer])
    elif is_quantum(rho.model):
        rep = _covariant_quantum(rho, setup, transports, tol, max_iter)
    else:
        raise UnsupportedModel(f"no covariant solver for {rho.model!r}")
    rep.covariant = symmetry.is_covariant_measurement(rep.measurement, setup, tol=1e-8)
    rep.notes["seed_variables"] = rho.system.dim
    return rep


def _covariant_lp(rho, transports, stab_maps) -> SolveReport:
    gens = _require_polyhedral(rho)
    u = rho.model.unit_effect()
    d = rho.system.dim
    S = sum(transports)  # sum_m e_0 Q_m = u  ->  S^T e_0 = u
    rows = [S.T @ gens.T]
    rhs = [u]
    for Q in stab_maps:
        rows.append((np.eye(d) - Q).T @ gens.T)
        rhs.append(np.zeros(d))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    target = sum(Q @ r for Q, r in zip(transports, rho.states))
    c = gens @ target
    res = simplex(c, A, b)
    if res.status != "optimal":
        raise RuntimeError(f"covariant LP returned {res.status}")
    seed = res.x @ gens
    e = Measurement(rho.system, np.array([seed @ Q for Q in transports]))
    return _report(e, rho, "covariant-lp", iterations=res.iterations)


def _covariant_quantum(rho, setup, transports, tol, max_iter) -> SolveReport:
    from . import symmetry

    dims = quantum_dims(rho.model)
    rhos = _as_operators(rho.states, dims)
    init = _initial_point(rhos, rho.priors)
    start = Measurement(rho.system, np.array([vectorize(x, dims) for x in init]))
    seed = symmetry.symmetrize(start, setup).effects[0]

    def expand(seed_vec):
        return [devectorize(seed_vec @ Q, dims) for Q in transports]

    def step(rhos_, effs):
        new = _fixed_point_step(rhos_, effs)
        return expand(vectorize(new[0], dims))

    effs = expand(seed)
    if rho.M == 1:
        return _quantum_report(rho, effs, _certificate(effs, rhos), "covariant-fixedpoint", 0, tol)
    (gap, effs, cert), it = _iterate_quantum(rhos, effs, tol, max_iter, step)
    rep = _quantum_report(rho, effs, cert, "covariant-fixedpoint", it, tol)
    if not rep.converged:
        raise NoConvergence(f"gap {rep.gap:.3e} after {it} iterations", rep)
    return rep


@dataclass(eq=False)
class DiscriminationInstance:
    preparation: StatePreparation
    symmetry: object = None  # symmetry.SymmetrySetup
    class_tag: str = "all"
    measurement: Measurement | None = None
    class_data: object = None  # classes.* representation of ``measurement``
    options: dict = field(default_factory=dict)
    name: str = ""

    @property
    def system(self) -> System:
        return self.preparation.system
