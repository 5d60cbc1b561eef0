"""Finite group actions on outcomes and on the state space, and the symmetrizer.

Conventions (row vectors are effects, column vectors are states):

* ``T_g`` is the permutation matrix with ``T_g[tau_g(m), m] = 1``.
* ``P_g`` acts on states by ``rho -> P_g rho`` and on effects by ``e -> e P_g``.
* A preparation is covariant when ``P_g R = R T_g`` (R has columns rho_m).
* A measurement is covariant when ``E P_g = T_g E`` (E has rows e_m).
* The symmetrizer is ``E' = (1/|G|) sum_h T_h^-1 E P_h``.

Both actions must be homomorphisms: ``T_g T_h = T_gh`` and ``P_g P_h = P_gh``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg
from .discrimination import Measurement, StatePreparation, solve, solve_covariant, success_probability
from .errors import DimensionMismatch, InvalidSetup, NotCovariant
from .models import is_quantum, random_measurement

ALG_TOL = 1e-12
COV_TOL = 1e-10
MATCH_TOL = 1e-9
MAX_GROUP_ORDER = 10_000


@dataclass(frozen=True)
class FiniteGroup:
    mult: tuple[tuple[int, ...], ...]
    identity: int
    inverse: tuple[int, ...]
    name: str = "table"

    @property
    def order(self) -> int:
        return len(self.mult)

    @classmethod
    def from_table(cls, table, name: str = "table") -> "FiniteGroup":
        mult = tuple(tuple(int(x) for x in row) for row in table)
        n = len(mult)
        ident = next(
            (e for e in range(n) if all(mult[e][g] == g and mult[g][e] == g for g in range(n))), None
        )
        if ident is None:
            ident = 0
        inverse = []
        for g in range(n):
            inv = next((h for h in range(n) if mult[g][h] == ident and mult[h][g] == ident), -1)
            inverse.append(inv)
        return cls(mult, ident, tuple(inverse), name)

    @classmethod
    def trivial(cls) -> "FiniteGroup":
        return cls(((0,),), 0, (0,), "trivial")

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        table = [[(a + b) % n for b in range(n)] for a in range(n)]
        return cls(tuple(map(tuple, table)), 0, tuple((-a) % n for a in range(n)), f"cyclic({n})")

    @classmethod
    def dihedral(cls, n: int) -> "FiniteGroup":
        """Elements r^k s^j with index k + n*j; s r s = r^-1."""

        def mul(x, y):
            a, i = x % n, x // n
            b, j = y % n, y // n
            k = (a + (b if i == 0 else -b)) % n
            return k + n * ((i + j) % 2)

        table = [[mul(x, y) for y in range(2 * n)] for x in range(2 * n)]
        return cls.from_table(table, f"dihedral({n})")

    def problems(self) -> list[str]:
        n = self.order
        out = []
        full = set(range(n))
        for g in range(n):
            if set(self.mult[g]) != full:
                return [f"row {g} of the multiplication table is not a permutation"]
            if {self.mult[h][g] for h in range(n)} != full:
                return [f"column {g} of the multiplication table is not a permutation"]
        for g in range(n):
            if self.mult[self.identity][g] != g or self.mult[g][self.identity] != g:
                return [f"identity law fails at g={g}"]
        for g in range(n):
            inv = self.inverse[g]
            if not (0 <= inv < n) or self.mult[g][inv] != self.identity:
                return [f"inverse law fails at g={g}"]
        for a in range(n):
            for b in range(n):
                ab = self.mult[a][b]
                for c in range(n):
                    if self.mult[ab][c] != self.mult[a][self.mult[b][c]]:
                        return [f"associativity fails at (g,h,k)=({a},{b},{c})"]
        return out


def perm_matrix(perm: Sequence[int]) -> np.ndarray:
    M = len(perm)
    t = np.zeros((M, M))
    for m, img in enumerate(perm):
        t[img, m] = 1.0
    return t


@dataclass(frozen=True, eq=False)
class OutcomeAction:
    group: FiniteGroup
    perms: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "perms", tuple(tuple(int(x) for x in p) for p in self.perms))

    @property
    def M(self) -> int:
        return len(self.perms[0])

    @cached_property
    def matrices(self) -> list[np.ndarray]:
        return [perm_matrix(p) for p in self.perms]

    @classmethod
    def cyclic_shift(cls, group: FiniteGroup, M: int, step: int = 1) -> "OutcomeAction":
        """Element g of a cyclic group maps m to m + g*step (mod M)."""
        return cls(group, tuple(tuple((m + g * step) % M for m in range(M)) for g in range(group.order)))


@dataclass(frozen=True, eq=False)
class StateSpaceAction:
    group: FiniteGroup
    maps: tuple[np.ndarray, ...]

    def __post_init__(self):
        maps = tuple(np.array(m, dtype=float) for m in self.maps)
        for m in maps:
            m.setflags(write=False)
        object.__setattr__(self, "maps", maps)

    @property
    def dim(self) -> int:
        return self.maps[0].shape[0]


@dataclass
class ValidationReport:
    valid: bool
    violations: list[str] = field(default_factory=list)

    @property
    def first(self) -> str | None:
        return self.violations[0] if self.violations else None

    def __bool__(self) -> bool:
        return self.valid


@dataclass(eq=False)
class SymmetrySetup:
    group: FiniteGroup
    tau: OutcomeAction
    pibar: StateSpaceAction
    system: object = None  # kernel.System used for the positivity check
    preserves: str = "all"
    positivity_samples: int = 64
    seed: int = 0

    @cached_property
    def report(self) -> ValidationReport:
        return validate_setup(self)

    def require_valid(self) -> None:
        if not self.report.valid:
            raise InvalidSetup(f"invalid symmetry setup: {self.report.first}")

    @classmethod
    def trivial(cls, system, M: int) -> "SymmetrySetup":
        g = FiniteGroup.trivial()
        return cls(g, OutcomeAction(g, (tuple(range(M)),)), StateSpaceAction(g, (np.eye(system.dim),)), system)


def _positive_for_effects(P: np.ndarray, system, rng, samples: int, tol: float) -> str | None:
    model = system.model
    if model.polyhedral:
        for j, w in enumerate(model.effect_generators()):
            if not model.in_effect_cone(w @ P, tol):
                return f"effect generator {j} leaves the effect cone"
        return None
    if is_quantum(model):
        sampler = model.pure_states()
        probes = [model.unit_effect()]
        probes += [sampler(rng) for _ in range(samples)]
        for k, w in enumerate(probes):
            if not model.in_effect_cone(w @ P, max(tol, 1e-10)):
                return f"sampled pure effect {k} leaves the effect cone"
        return None
    return None


def validate_setup(s: SymmetrySetup) -> ValidationReport:
    v: list[str] = []
    G = s.group
    v += G.problems()
    if v:
        return ValidationReport(False, v)
    n = G.order
    if len(s.tau.perms) != n or len(s.pibar.maps) != n:
        return ValidationReport(False, ["action does not list one entry per group element"])
    M = s.tau.M
    for g, p in enumerate(s.tau.perms):
        if sorted(p) != list(range(M)):
            return ValidationReport(False, [f"tau_{g} is not a permutation of the outcomes"])
    T = s.tau.matrices
    P = s.pibar.maps
    d = P[0].shape[0]
    if any(x.shape != (d, d) for x in P):
        return ValidationReport(False, ["state-space maps have inconsistent shapes"])
    if not np.array_equal(T[G.identity], np.eye(M)):
        v.append("tau_1 is not the identity")
    if np.max(np.abs(P[G.identity] - np.eye(d))) > ALG_TOL:
        v.append("pibar_1 is not the identity")
    for g in range(n):
        for h in range(n):
            gh = G.mult[g][h]
            if not np.array_equal(T[g] @ T[h], T[gh]):
                v.append(f"tau_g tau_h != tau_gh at (g,h)=({g},{h})")
            scale = max(1.0, float(np.max(np.abs(P[gh]))))
            if np.max(np.abs(P[g] @ P[h] - P[gh])) > ALG_TOL * scale * d:
                v.append(f"pibar_g pibar_h != pibar_gh at (g,h)=({g},{h})")
        if np.max(np.abs(P[G.inverse[g]] @ P[g] - np.eye(d))) > ALG_TOL * d:
            v.append(f"pibar_g^-1 is not the inverse of pibar_g at g={g}")
    if s.system is not None:
        if s.system.dim != d:
            v.append("state-space maps do not match the system dimension")
        else:
            u = s.system.model.unit_effect()
            rng = np.random.default_rng(s.seed)
            for g in range(n):
                if np.max(np.abs(u @ P[g] - u)) > COV_TOL:
                    v.append(f"pibar_{g} is not deterministic")
                bad = _positive_for_effects(P[g], s.system, rng, s.positivity_samples, COV_TOL)
                if bad:
                    v.append(f"pibar_{g} is not positive for effects: {bad}")
    return ValidationReport(not v, v)


def _check_dims(s: SymmetrySetup, d: int, M: int) -> None:
    if s.pibar.dim != d or s.tau.M != M:
        raise DimensionMismatch(f"setup acts on (d={s.pibar.dim}, M={s.tau.M}), data has (d={d}, M={M})")


def preparation_residual(rho: StatePreparation, s: SymmetrySetup) -> float:
    _check_dims(s, rho.system.dim, rho.M)
    R = rho.matrix
    return max(float(np.max(np.abs(P @ R - R @ T))) for P, T in zip(s.pibar.maps, s.tau.matrices))


def is_covariant_preparation(rho: StatePreparation, s: SymmetrySetup, tol: float = COV_TOL) -> bool:
    return preparation_residual(rho, s) <= tol


def covariance_residual(e: Measurement, s: SymmetrySetup) -> float:
    """max_g ||E P_g - T_g E||_max."""
    _check_dims(s, e.system.dim, e.M)
    E = e.effects
    return max(float(np.max(np.abs(E @ P - T @ E))) for P, T in zip(s.pibar.maps, s.tau.matrices))


def is_covariant_measurement(e: Measurement, s: SymmetrySetup, tol: float = COV_TOL) -> bool:
    return covariance_residual(e, s) <= tol


def symmetrize(e: Measurement, s: SymmetrySetup) -> Measurement:
    s.require_valid()
    _check_dims(s, e.system.dim, e.M)
    E = e.effects
    terms = [T.T @ E @ P for T, P in zip(s.tau.matrices, s.pibar.maps)]  # T^-1 = T^T
    return Measurement(e.system, linalg.neumaier_sum(terms) / s.group.order)


def permute_outcomes(e: Measurement, perm: Sequence[int]) -> Measurement:
    """Relabel outcome m as perm[m]."""
    return Measurement(e.system, perm_matrix(perm) @ e.effects)


def transversal(tau: OutcomeAction, base: int = 0) -> list[int] | None:
    """For each outcome m the first group element mapping ``base`` to m, or None."""
    out: list[int | None] = [None] * tau.M
    for g, p in enumerate(tau.perms):
        if out[p[base]] is None:
            out[p[base]] = g
    return None if any(x is None for x in out) else out  # type: ignore[return-value]


def from_generators(gen_perms, gen_maps, system=None, cap: int = MAX_GROUP_ORDER) -> SymmetrySetup:
    """Close (tau, pibar) generator pairs under multiplication into a setup."""
    gen_perms = [tuple(int(x) for x in p) for p in gen_perms]
    gen_maps = [np.asarray(m, dtype=float) for m in gen_maps]
    if not gen_perms:
        raise InvalidSetup("at least one generator is required")
    M = len(gen_perms[0])
    d = gen_maps[0].shape[0]

    # elements are matched by permutation first, then by map up to MATCH_TOL
    buckets: dict[tuple[int, ...], list[int]] = {}

    def find(p, P) -> int | None:
        for i in buckets.get(p, ()):
            if np.max(np.abs(elems[i][1] - P)) <= MATCH_TOL:
                return i
        return None

    def add(p, P) -> int:
        elems.append((p, P))
        buckets.setdefault(p, []).append(len(elems) - 1)
        return len(elems) - 1

    def compose(p1, P1, p2, P2):
        # (g h): T_g T_h, P_g P_h ; perm of gh is p1 after p2
        return tuple(p1[p2[m]] for m in range(M)), P1 @ P2

    elems: list = []
    add(tuple(range(M)), np.eye(d))
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for gp, gP in zip(gen_perms, gen_maps):
                p, P = compose(*elems[i], gp, gP)
                if find(p, P) is None:
                    if len(elems) >= cap:
                        raise InvalidSetup(f"group closure exceeded {cap} elements")
                    nxt.append(add(p, P))
        frontier = nxt
    n = len(elems)
    table = []
    for i in range(n):
        row = []
        for j in range(n):
            k = find(*compose(*elems[i], *elems[j]))
            if k is None:
                raise InvalidSetup("generated set is not closed; maps are not of finite order")
            row.append(k)
        table.append(row)
    G = FiniteGroup.from_table(table, "generated")
    return SymmetrySetup(
        G, OutcomeAction(G, [e[0] for e in elems]), StateSpaceAction(G, [e[1] for e in elems]), system
    )


@dataclass
class TheoremReport:
    trials: int
    counterexamples: list[str]
    max_ps_deviation: float
    max_covariance_residual: float
    optimum_all: float | None = None
    optimum_covariant: float | None = None

    @property
    def optimum_gap(self) -> float | None:
        if self.optimum_all is None or self.optimum_covariant is None:
            return None
        return abs(self.optimum_all - self.optimum_covariant)

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def verify_symmetry_theorem(
    rho: StatePreparation,
    s: SymmetrySetup,
    trials: int = 100,
    seed: int = 0,
    ps_tol: float = 1e-12,
    cov_tol: float = COV_TOL,
    opt_tol: float = 1e-8,
    solve_optima: bool = True,
) -> TheoremReport:
    """Check P_S preservation and covariance of the symmetrized measurement on random inputs,
    then compare the unrestricted optimum with the covariant one."""
    s.require_valid()
    if not is_covariant_preparation(rho, s):
        raise NotCovariant("state preparation is not covariant; the theorem does not apply")
    rng = np.random.default_rng(seed)
    bad: list[str] = []
    worst_ps = 0.0
    worst_cov = 0.0
    for k in range(trials):
        e = Measurement(rho.system, random_measurement(rho.model, rho.M, rng))
        es = symmetrize(e, s)
        dev = abs(success_probability(es, rho) - success_probability(e, rho))
        cov = covariance_residual(es, s)
        worst_ps = max(worst_ps, dev)
        worst_cov = max(worst_cov, cov)
        if dev > ps_tol:
            bad.append(f"trial {k}: P_S changed by {dev:.3e}")
        if cov > cov_tol:
            bad.append(f"trial {k}: symmetrized measurement has covariance residual {cov:.3e}")
        if not es.is_valid():
            bad.append(f"trial {k}: symmetrized effects do not form a measurement")
    rep = TheoremReport(trials, bad, worst_ps, worst_cov)
    if solve_optima:
        full = solve(rho, "auto")
        cov = solve_covariant(rho, s)
        rep.optimum_all, rep.optimum_covariant = full.value, cov.value
        if abs(full.value - cov.value) > opt_tol:
            bad.append(f"optimum {full.value!r} differs from covariant optimum {cov.value!r}")
        if not cov.covariant:
            bad.append("covariant solver returned a non-covariant measurement")
    return rep
