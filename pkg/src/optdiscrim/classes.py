"""Restricted measurement classes on a bipartite system A⊗B.

Class membership is certified constructively: a sequential or LOCC
measurement carries its local processes, a separable one carries a product
decomposition of every effect. Conversions along
sequential ⊆ LOCC ⊆ separable ⊆ PT return explicit witnesses.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernel, linalg
from .discrimination import Measurement
from .errors import (
    ClassMismatch,
    OptDiscrimError,
    PreconditionFailed,
    SystemMismatch,
    TooLarge,
    UnsupportedModel,
    UnsupportedWiring,
)
from .kernel import ExtendedProcess, System
from .models import devectorize, is_quantum, quantum_dims, superoperator, unitary_action, vectorize
from .symmetry import SymmetrySetup, perm_matrix

MAX_MESSAGE_DIM = 16
RECON_TOL = 1e-12
POS_SAMPLES = 200


class NotFound(OptDiscrimError):
    """No outcome of the measurement has a non-positive partial transpose."""


def _message_system(n: int) -> System:
    if n > MAX_MESSAGE_DIM:
        raise TooLarge(f"classical message dimension {n} exceeds the cap {MAX_MESSAGE_DIM}")
    return kernel.classical(n, "D")


# ---------------------------------------------------------------------------
# Separable


@dataclass(eq=False)
class SeparableMeasurement:
    """terms[m] lists (weight, alpha, beta) with e_m = sum weight * alpha ⊗ beta."""

    A: System
    B: System
    terms: list[list[tuple[float, np.ndarray, np.ndarray]]]

    @property
    def M(self) -> int:
        return len(self.terms)

    @property
    def system(self) -> System:
        return kernel.tensor(self.A, self.B)

    def effects(self) -> np.ndarray:
        out = np.zeros((self.M, self.A.dim * self.B.dim))
        for m, ts in enumerate(self.terms):
            for w, a, b in ts:
                out[m] += w * np.kron(a, b)
        return out

    def measurement(self) -> Measurement:
        return Measurement(self.system, self.effects())

    def problems(self, tol: float = kernel.DET_TOL) -> list[str]:
        out = []
        for m, ts in enumerate(self.terms):
            for k, (w, a, b) in enumerate(ts):
                if w < -tol:
                    out.append(f"outcome {m} term {k}: negative weight")
                if not self.A.model.in_effect_cone(a, tol):
                    out.append(f"outcome {m} term {k}: A factor is not an effect")
                if not self.B.model.in_effect_cone(b, tol):
                    out.append(f"outcome {m} term {k}: B factor is not an effect")
        if not self.measurement().is_valid(tol):
            out.append("effects do not form a measurement")
        return out

    def is_valid(self, tol: float = kernel.DET_TOL) -> bool:
        return not self.problems(tol)

    @property
    def term_count(self) -> int:
        return sum(len(t) for t in self.terms)


# ---------------------------------------------------------------------------
# Sequential


@dataclass(eq=False)
class SequentialMeasurement:
    """Alice measures ``a`` (outcome i in D), Bob then measures ``branches[i]``."""

    A: System
    B: System
    a: np.ndarray  # (D, dA) effects
    branches: list[np.ndarray]  # each (M, dB)

    def __post_init__(self):
        self.a = np.array(self.a, dtype=float, ndmin=2)
        self.branches = [np.array(b, dtype=float, ndmin=2) for b in self.branches]
        if len(self.branches) != self.a.shape[0]:
            raise SystemMismatch("need one branch measurement per outcome of a")
        if len({b.shape for b in self.branches}) != 1:
            raise SystemMismatch("branch measurements must share outcome count and system")
        _message_system(self.D)

    @property
    def D(self) -> int:
        return self.a.shape[0]

    @property
    def M(self) -> int:
        return self.branches[0].shape[0]

    @property
    def system(self) -> System:
        return kernel.tensor(self.A, self.B)

    def a_process(self) -> ExtendedProcess:
        return ExtendedProcess(self.A, _message_system(self.D), self.a)

    def b_process(self) -> ExtendedProcess:
        """Controlled measurement D⊗B -> C: input |i> selects branches[i]."""
        return ExtendedProcess(
            kernel.tensor(_message_system(self.D), self.B), kernel.classical(self.M), np.hstack(self.branches)
        )

    def branch(self, i: int) -> np.ndarray:
        """b ∘ (|i> ⊗ id_B), recovered from the controlled process."""
        d = _message_system(self.D)
        ket = kernel.state(d, np.eye(self.D)[i])
        return kernel.compose_seq(kernel.compose_par(ket, kernel.identity(self.B)), self.b_process()).matrix

    def process(self) -> ExtendedProcess:
        first = kernel.compose_par(self.a_process(), kernel.identity(self.B))
        return kernel.compose_seq(first, self.b_process())

    def measurement(self) -> Measurement:
        return Measurement(self.system, self.process().matrix)

    def problems(self, tol: float = kernel.DET_TOL) -> list[str]:
        out = []
        if not Measurement(self.A, self.a).is_valid(tol):
            out.append("first-party measurement a is invalid")
        for i, b in enumerate(self.branches):
            if not Measurement(self.B, b).is_valid(tol):
                out.append(f"branch measurement {i} is invalid")
        if not kernel.is_deterministic(self.b_process(), tol=tol):
            out.append("controlled measurement is not deterministic")
        if not self.measurement().is_valid(tol):
            out.append("composite is not a measurement")
        return out

    def is_valid(self, tol: float = kernel.DET_TOL) -> bool:
        return not self.problems(tol)

    def to_locc(self) -> "LoccMeasurement":
        return LoccMeasurement(self.A, self.B, [self.a_process()], [self.b_process()])


def make_sequential(A: System, B: System, a, branches) -> SequentialMeasurement:
    sm = SequentialMeasurement(A, B, a, list(branches))
    bad = sm.problems()
    if bad:
        raise SystemMismatch("; ".join(bad))
    return sm


def seq_to_separable(sm: SequentialMeasurement) -> SeparableMeasurement:
    terms = [[] for _ in range(sm.M)]
    for i in range(sm.D):
        b_i = sm.branch(i)
        for m in range(sm.M):
            terms[m].append((1.0, sm.a[i].copy(), b_i[m].copy()))
    return SeparableMeasurement(sm.A, sm.B, terms)


# ---------------------------------------------------------------------------
# LOCC


def _split(f: ExtendedProcess):
    return [a.dim for a in f.output.atoms] or [1], [a.dim for a in f.input.atoms] or [1]


def _slice(f: ExtendedProcess, out_pos=None, out_idx=None, in_pos=None, in_idx=None) -> np.ndarray:
    """Fix one output and/or input atom of ``f`` to a classical basis label."""
    od, idim = _split(f)
    t = f.matrix.reshape(od + idim)
    index: list = [slice(None)] * (len(od) + len(idim))
    if out_pos is not None:
        index[out_pos] = out_idx
    if in_pos is not None:
        index[len(od) + in_pos] = in_idx
    t = t[tuple(index)]
    keep_out = [d for k, d in enumerate(od) if k != out_pos]
    keep_in = [d for k, d in enumerate(idim) if k != in_pos]
    return t.reshape(int(np.prod(keep_out)), int(np.prod(keep_in)))


@dataclass(eq=False)
class LoccMeasurement:
    """Rounds of local processes exchanging one classical message system D.

    a_steps[0]: A -> A_1⊗D, a_steps[k]: A_k⊗D -> A_{k+1}⊗D, last: A_{n-1}⊗D -> D.
    b_steps[k]: D⊗B_k -> D⊗B_{k+1}, last: D⊗B_{n-1} -> C.
    With one round (a: A -> D, b: D⊗B -> C) this is a sequential measurement.
    """

    A: System
    B: System
    a_steps: list[ExtendedProcess]
    b_steps: list[ExtendedProcess]

    def __post_init__(self):
        if len(self.a_steps) != len(self.b_steps) or not self.a_steps:
            raise UnsupportedWiring("LOCC needs the same positive number of Alice and Bob rounds")
        self._check_wiring()

    @property
    def rounds(self) -> int:
        return len(self.a_steps)

    @property
    def M(self) -> int:
        return self.b_steps[-1].output.dim

    @property
    def D(self) -> int:
        return self.a_steps[0].output.atoms[-1].dim

    @property
    def system(self) -> System:
        return kernel.tensor(self.A, self.B)

    def _message(self, s: System, where: str) -> System:
        atom = s.atoms[-1] if where == "last" else s.atoms[0]
        if not atom.is_classical:
            raise UnsupportedWiring(f"non-classical system {atom} crosses between the parties")
        return atom

    def _check_wiring(self) -> None:
        n = self.rounds
        if not self.a_steps[0].input.same_as(self.A):
            raise UnsupportedWiring("first Alice step must act on A")
        d = None
        for k in range(n):
            a, b = self.a_steps[k], self.b_steps[k]
            msg = self._message(a.output, "last")
            if d is None:
                d = msg
            if not msg.same_as(d):
                raise UnsupportedWiring("message system changes between rounds")
            if k > 0 and not self._message(a.input, "last").same_as(d):
                raise UnsupportedWiring(f"Alice step {k} does not receive the message")
            if not self._message(b.input, "first").same_as(d):
                raise UnsupportedWiring(f"Bob step {k} does not receive the message")
            if k < n - 1 and not self._message(b.output, "first").same_as(d):
                raise UnsupportedWiring(f"Bob step {k} does not send the message back")
        if not self.b_steps[0].input.atoms[1:] == self.B.atoms:
            raise UnsupportedWiring("first Bob step must act on B")
        if not self.b_steps[-1].output.is_classical:
            raise UnsupportedWiring("last Bob step must output the classical result")
        _message_system(d.dim)

    def process(self) -> ExtendedProcess:
        n = self.rounds
        f = kernel.identity(self.system)
        bsys = self.B
        for k in range(n):
            f = kernel.compose_seq(f, kernel.compose_par(self.a_steps[k], kernel.identity(bsys)))
            a_out = kernel.tensor_all(self.a_steps[k].output.atoms[:-1])
            f = kernel.compose_seq(f, kernel.compose_par(kernel.identity(a_out), self.b_steps[k]))
            bsys = kernel.tensor_all(self.b_steps[k].output.atoms[1:])
        return f

    def measurement(self) -> Measurement:
        return Measurement(self.system, self.process().matrix)

    def problems(self, tol: float = kernel.DET_TOL) -> list[str]:
        out = []
        for k, s in enumerate(self.a_steps):
            if not kernel.is_deterministic(s, tol=tol):
                out.append(f"Alice step {k} is not deterministic")
        for k, s in enumerate(self.b_steps):
            if not kernel.is_deterministic(s, tol=tol):
                out.append(f"Bob step {k} is not deterministic")
        if not self.measurement().is_valid(tol):
            out.append("composite is not a measurement")
        return out

    def is_valid(self, tol: float = kernel.DET_TOL) -> bool:
        return not self.problems(tol)


def locc_to_separable(lm: LoccMeasurement, prune: float = 0.0) -> SeparableMeasurement:
    """Expand every classical message history into a product term."""
    n, D = lm.rounds, lm.D
    terms: list[list] = [[] for _ in range(lm.M)]

    # Alice side: chain of slices, starting from the identity on A.
    def alice(k: int, received: int | None, acc: np.ndarray):
        step = lm.a_steps[k]
        last_in = len(step.input.atoms) - 1
        for sent in range(D):
            if k == 0:
                piece = _slice(step, out_pos=len(step.output.atoms) - 1, out_idx=sent)
            else:
                piece = _slice(step, out_pos=len(step.output.atoms) - 1, out_idx=sent, in_pos=last_in, in_idx=received)
            yield sent, piece @ acc

    def bob(k: int, received: int, acc: np.ndarray, last: bool):
        step = lm.b_steps[k]
        if last:
            for m in range(lm.M):
                yield m, _slice(step, out_pos=0, out_idx=m, in_pos=0, in_idx=received) @ acc
        else:
            for sent in range(D):
                yield sent, _slice(step, out_pos=0, out_idx=sent, in_pos=0, in_idx=received) @ acc

    def walk(k: int, a_acc, b_acc, msg_from_bob):
        for sent, a_next in alice(k, msg_from_bob, a_acc):
            if np.max(np.abs(a_next), initial=0.0) <= prune:
                continue
            last = k == n - 1
            for reply, b_next in bob(k, sent, b_acc, last):
                if np.max(np.abs(b_next), initial=0.0) <= prune:
                    continue
                if last:
                    terms[reply].append((1.0, a_next.reshape(-1).copy(), b_next.reshape(-1).copy()))
                else:
                    walk(k + 1, a_next, b_next, reply)

    walk(0, np.eye(lm.A.dim), np.eye(lm.B.dim), None)
    return SeparableMeasurement(lm.A, lm.B, terms)


# ---------------------------------------------------------------------------
# PT


def transformed_effects(e: Measurement, fbar: ExtendedProcess, B: System) -> Measurement:
    """e ∘ (fbar ⊗ id_B), a candidate measurement on A'⊗B."""
    full = kernel.compose_par(fbar, kernel.identity(B))
    return Measurement(full.input, e.effects @ full.matrix)


def _sample_effects(system: System, rng, samples: int) -> list[np.ndarray]:
    model = system.model
    if model.polyhedral:
        return list(model.effect_generators())
    if is_quantum(model):
        sampler = model.pure_states()
        return [model.unit_effect()] + [sampler(rng) for _ in range(samples)]
    raise UnsupportedModel(f"cannot sample effects of {model!r}")


def positivity_residual(fbar: ExtendedProcess, samples: int = POS_SAMPLES, seed: int = 0) -> float:
    """Smallest cone slack of b ∘ fbar over sampled effects b (>= 0 when positive)."""
    rng = np.random.default_rng(seed)
    src = fbar.input.model
    worst = np.inf
    for b in _sample_effects(fbar.output, rng, samples):
        w = b @ fbar.matrix
        worst = min(worst, _cone_slack(src, w))
    return float(worst)


def _cone_slack(model, w) -> float:
    if is_quantum(model):
        return linalg.min_eigenvalue(devectorize(w, quantum_dims(model)))
    if model.polyhedral:
        from .models import CompositeModel, PolytopeModel

        if isinstance(model, PolytopeModel):
            return float(np.min(model.states @ w))
        if isinstance(model, CompositeModel) and any(isinstance(f, PolytopeModel) for f in model.factors):
            return 0.0 if model.in_effect_cone(w) else -1.0
        return float(np.min(w))
    raise UnsupportedModel(f"no cone slack for {model!r}")


def pt_residual(e: Measurement, fbar: ExtendedProcess, B: System) -> tuple[float, float]:
    """(most negative cone slack over transformed effects, normalization error)."""
    t = transformed_effects(e, fbar, B)
    slack = min(_cone_slack(t.system.model, row) for row in t.effects)
    return slack, t.normalization_residual()


def check_pt(e: Measurement, fbar: ExtendedProcess, B: System, samples: int = POS_SAMPLES, seed: int = 0) -> bool:
    if not kernel.is_deterministic(fbar):
        raise PreconditionFailed("fbar is not deterministic")
    if positivity_residual(fbar, samples, seed) < -kernel.DET_TOL:
        raise PreconditionFailed("fbar is not positive for effects on the sampled effects")
    if not fbar.output.same_as(_first_factor(e.system, B)):
        raise SystemMismatch("fbar must output the first factor of the measured system")
    return transformed_effects(e, fbar, B).is_valid()


def _first_factor(ab: System, B: System) -> System:
    atoms = ab.atoms
    nb = len(B.atoms)
    return kernel.tensor_all(atoms[: len(atoms) - nb])


def random_positive_map(system: System, rng: np.random.Generator, terms: int = 3) -> ExtendedProcess:
    """Convex mixture of reversible deterministic maps that are positive for effects."""
    model = system.model
    weights = rng.dirichlet(np.ones(terms))
    if is_quantum(model):
        dims = quantum_dims(model)
        n = int(np.prod(dims))
        mats = []
        for _ in range(terms):
            z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            q, r = np.linalg.qr(z)
            u = q * (np.diag(r) / np.abs(np.diag(r)))
            mats.append(unitary_action(u, antiunitary=bool(rng.integers(2)), dims=dims))
    elif model.polyhedral and all(g == "classical" for g in _atom_kinds(system)):
        d = system.dim
        mats = [np.eye(d)[rng.permutation(d)] for _ in range(terms)]
    else:
        raise UnsupportedModel(f"no random positive maps for {model!r}")
    return ExtendedProcess(system, system, sum(w * m for w, m in zip(weights, mats)))


def _atom_kinds(system: System) -> list[str]:
    return [a.model.kind for a in system.atoms]


@dataclass
class PTWitnessReport:
    outcome: int
    vbar: np.ndarray = field(repr=False)
    normalizer: np.ndarray = field(repr=False)  # v_B^{-1/2}
    fbar: ExtendedProcess = field(repr=False)
    violation: float  # most negative eigenvalue of the transformed effect
    pairing: float  # <e_m | vbar> before any perturbation
    perturbation: float
    determinism_residual: float
    product_pairing_min: float
    positivity_min: float
    exact: bool  # PPT decides separability at these dimensions


def pt_witness(
    e: Measurement, A: System, B: System, tol: float = 1e-10, samples: int = POS_SAMPLES, seed: int = 0
) -> PTWitnessReport:
    """Exhibit fbar: B -> A that is deterministic and positive for effects while
    e ∘ (fbar ⊗ id_B) is not a measurement. Raises ``NotFound`` when every effect is PPT."""
    if not (is_quantum(A.model) and is_quantum(B.model)):
        raise UnsupportedModel("the PT witness is built for quantum systems")
    (da,), (db,) = quantum_dims(A.model), quantum_dims(B.model)
    exact = da * db <= 6
    dims = (da, db)
    rng = np.random.default_rng(seed)
    for m, row in enumerate(e.effects):
        E = devectorize(row, dims)
        w, v = linalg.eigh(linalg.partial_transpose(E, da, db))
        if w[0] >= -tol:
            continue
        phi = v[:, 0]
        vbar = linalg.partial_transpose(linalg.projector(phi), da, db)
        pairing = float(np.real(np.trace(E @ vbar)))
        v_b = linalg.partial_trace(vbar, da, db, keep="b")
        c = 0.0
        if linalg.min_eigenvalue(v_b) <= 1e-9:
            rho0 = np.eye(da) / da
            scale = float(np.real(np.trace(E @ np.kron(rho0, np.eye(db)))))
            c = min(1e-2, abs(pairing) / (2 * scale)) if scale > 0 else 1e-2
            vbar = vbar + c * np.kron(rho0, np.eye(db))
            v_b = linalg.partial_trace(vbar, da, db, keep="b")
        g = linalg.inv_sqrt(v_b)
        wbar = np.kron(np.eye(da), g) @ vbar @ np.kron(np.eye(da), g)

        def fmap(sigma, wbar=wbar):
            return linalg.partial_trace(wbar @ np.kron(np.eye(da), sigma.T), da, db, keep="a")

        fbar = ExtendedProcess(B, A, superoperator(fmap, (db,), (da,)))
        t = transformed_effects(e, fbar, B)
        violation = linalg.min_eigenvalue(devectorize(t.effects[m], (db, db)))
        sampler_a, sampler_b = A.model.pure_states(), B.model.pure_states()
        prod_min = np.inf
        for _ in range(samples):
            ba, bb = sampler_a.sample_matrix(rng), sampler_b.sample_matrix(rng)
            prod_min = min(prod_min, float(np.real(np.trace(np.kron(ba, bb) @ vbar))))
        return PTWitnessReport(
            outcome=m,
            vbar=vbar,
            normalizer=g,
            fbar=fbar,
            violation=violation,
            pairing=pairing,
            perturbation=c,
            determinism_residual=kernel.determinism_residual(fbar),
            product_pairing_min=float(prod_min),
            positivity_min=positivity_residual(fbar, samples, seed),
            exact=exact,
        )
    raise NotFound("every effect has a positive partial transpose")


# ---------------------------------------------------------------------------
# Class-preserving operations


def permute_outcomes_in_class(x, perm: Sequence[int]):
    """Relabel outcome m as perm[m], keeping the class representation."""
    perm = list(perm)
    T = perm_matrix(perm)
    if isinstance(x, SequentialMeasurement):
        return SequentialMeasurement(x.A, x.B, x.a, [T @ b for b in x.branches])
    if isinstance(x, LoccMeasurement):
        last = x.b_steps[-1]
        new_last = ExtendedProcess(last.input, last.output, T @ last.matrix)
        return LoccMeasurement(x.A, x.B, list(x.a_steps), list(x.b_steps[:-1]) + [new_last])
    if isinstance(x, SeparableMeasurement):
        terms = [None] * x.M
        for m, ts in enumerate(x.terms):
            terms[perm[m]] = list(ts)
        return SeparableMeasurement(x.A, x.B, terms)
    if isinstance(x, Measurement):
        return Measurement(x.system, T @ x.effects)
    raise ClassMismatch(f"unsupported class representation {type(x).__name__}")


def convex_mix_in_class(x, y, p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError("mixing weight must lie in [0, 1]")
    return mixture_in_class([x, y], [p, 1.0 - p])


def mixture_in_class(items: Sequence, weights: Sequence[float]):
    kinds = {type(x) for x in items}
    if len(kinds) != 1:
        raise ClassMismatch("cannot mix measurements of different classes")
    first = items[0]
    for x in items[1:]:
        if not x.system.same_as(first.system) or x.M != first.M:
            raise ClassMismatch("measurements act on different systems or have different outcome counts")
    weights = [float(w) for w in weights]
    if isinstance(first, SeparableMeasurement):
        terms = [[] for _ in range(first.M)]
        for x, w in zip(items, weights):
            for m in range(x.M):
                terms[m].extend((w * c, a, b) for c, a, b in x.terms[m])
        return SeparableMeasurement(first.A, first.B, terms)
    if isinstance(first, SequentialMeasurement):
        a = np.vstack([w * x.a for x, w in zip(items, weights)])
        branches = [b for x in items for b in x.branches]
        return SequentialMeasurement(first.A, first.B, a, branches)
    if isinstance(first, LoccMeasurement):
        return _mix_locc(items, weights)
    if isinstance(first, Measurement):
        return Measurement(first.system, sum(w * x.effects for x, w in zip(items, weights)))
    raise ClassMismatch(f"unsupported class representation {type(first).__name__}")


def _block_embed(steps: Sequence[ExtendedProcess], scales, msg_out: int | None, msg_in: int | None, new_d: System):
    """Place processes side by side on an enlarged message system.

    ``msg_out``/``msg_in`` give the atom position of the message on the
    output/input side (None when absent). Cross blocks are zero.
    """
    ref = steps[0]
    offs = np.cumsum([0] + [s.output.atoms[msg_out].dim if msg_out is not None else s.input.atoms[msg_in].dim for s in steps])
    od_ref, id_ref = _split(ref)
    od_new = list(od_ref)
    id_new = list(id_ref)
    if msg_out is not None:
        od_new[msg_out] = new_d.dim
    if msg_in is not None:
        id_new[msg_in] = new_d.dim
    t = np.zeros(od_new + id_new)
    for s, c, off in zip(steps, scales, offs):
        od, idim = _split(s)
        blk = s.matrix.reshape(od + idim) * c
        index: list = [slice(None)] * (len(od) + len(idim))
        if msg_out is not None:
            index[msg_out] = slice(off, off + od[msg_out])
        if msg_in is not None:
            index[len(od) + msg_in] = slice(off, off + idim[msg_in])
        t[tuple(index)] += blk

    def swap_atoms(sys_: System, pos):
        if pos is None:
            return sys_
        atoms = list(sys_.atoms)
        atoms[pos] = new_d
        return kernel.tensor_all(atoms)

    return ExtendedProcess(
        swap_atoms(ref.input, msg_in), swap_atoms(ref.output, msg_out), t.reshape(int(np.prod(od_new)), int(np.prod(id_new)))
    )


def _mix_locc(items: Sequence[LoccMeasurement], weights) -> LoccMeasurement:
    n = items[0].rounds
    if any(x.rounds != n for x in items):
        raise ClassMismatch("LOCC mixtures need equal round counts")
    for k in range(n):
        ref_a, ref_b = items[0].a_steps[k], items[0].b_steps[k]
        for x in items[1:]:
            if [a.dim for a in x.a_steps[k].output.atoms[:-1]] != [a.dim for a in ref_a.output.atoms[:-1]]:
                raise ClassMismatch("LOCC mixtures need matching intermediate systems")
            if [a.dim for a in x.b_steps[k].output.atoms[1:]] != [a.dim for a in ref_b.output.atoms[1:]]:
                raise ClassMismatch("LOCC mixtures need matching intermediate systems")
    new_d = _message_system(sum(x.D for x in items))
    ones = [1.0] * len(items)
    a_steps, b_steps = [], []
    for k in range(n):
        a_k = [x.a_steps[k] for x in items]
        b_k = [x.b_steps[k] for x in items]
        out_pos = len(a_k[0].output.atoms) - 1
        in_pos = None if k == 0 else len(a_k[0].input.atoms) - 1
        a_steps.append(_block_embed(a_k, weights if k == 0 else ones, out_pos, in_pos, new_d))
        last = k == n - 1
        b_steps.append(_block_embed(b_k, ones, None if last else 0, 0, new_d))
    return LoccMeasurement(items[0].A, items[0].B, a_steps, b_steps)


def _locally_transformed(x, PA: np.ndarray, PB: np.ndarray):
    """x ∘ (PA ⊗ PB): precompose every local effect/process with the local maps."""
    if isinstance(x, SeparableMeasurement):
        return SeparableMeasurement(x.A, x.B, [[(w, a @ PA, b @ PB) for w, a, b in ts] for ts in x.terms])
    if isinstance(x, SequentialMeasurement):
        return SequentialMeasurement(x.A, x.B, x.a @ PA, [b @ PB for b in x.branches])
    if isinstance(x, LoccMeasurement):
        a0, b0 = x.a_steps[0], x.b_steps[0]
        new_a0 = ExtendedProcess(a0.input, a0.output, a0.matrix @ PA)
        new_b0 = ExtendedProcess(b0.input, b0.output, b0.matrix @ np.kron(np.eye(x.D), PB))
        return LoccMeasurement(x.A, x.B, [new_a0] + list(x.a_steps[1:]), [new_b0] + list(x.b_steps[1:]))
    raise ClassMismatch(f"unsupported class representation {type(x).__name__}")


def symmetrize_in_class(x, setup: SymmetrySetup, local_a: Sequence[np.ndarray], local_b: Sequence[np.ndarray]):
    """Group average of a class measurement under a product action P_g = PA_g ⊗ PB_g.

    Each term relabels outcomes by tau_h^-1 and precomposes locally, so the
    class representation is kept and the effects equal ``symmetrize``.
    """
    setup.require_valid()
    for g, P in enumerate(setup.pibar.maps):
        if np.max(np.abs(np.kron(local_a[g], local_b[g]) - P)) > 1e-12:
            raise ClassMismatch(f"pibar_{g} is not the product of the supplied local maps")
    parts = []
    for h, perm in enumerate(setup.tau.perms):
        inv = [0] * len(perm)
        for m, img in enumerate(perm):
            inv[img] = m
        parts.append(permute_outcomes_in_class(_locally_transformed(x, local_a[h], local_b[h]), inv))
    n = setup.group.order
    return mixture_in_class(parts, [1.0 / n] * n)


def random_sequential(A: System, B: System, D: int, M: int, rng) -> SequentialMeasurement:
    from .models import random_measurement

    a = random_measurement(A.model, D, rng)
    branches = [random_measurement(B.model, M, rng) for _ in range(D)]
    return SequentialMeasurement(A, B, a, branches)


def instrument(src: System, dst: System, in_msg: System | None, out_msg: System, side: str, kraus) -> ExtendedProcess:
    """Real matrix of a quantum instrument with classical message wires.

    ``kraus[(i, j)]`` lists Kraus operators applied when message i arrives
    (i = 0 without an incoming wire) and j is emitted. Alice (side "a")
    keeps messages as the last factor, Bob (side "b") as the first. A
    trivial ``dst`` turns the instrument into a controlled measurement.
    """
    din = quantum_dims(src.model)
    n_in = in_msg.dim if in_msg is not None else 1
    n_out = out_msg.dim
    blocks = np.zeros((max(dst.dim, 1), n_out, src.dim, n_in))
    for (i, j), ops in kraus.items():
        if dst.is_trivial:
            blocks[0, j, :, i] = vectorize(sum(k.conj().T @ k for k in ops), din)
        else:
            blocks[:, j, :, i] = superoperator(lambda x, ops=ops: sum(k @ x @ k.conj().T for k in ops), din, quantum_dims(dst.model))
    if side == "a":
        t = blocks  # (dst, j, src, i)
        in_sys = src if in_msg is None else kernel.tensor(src, in_msg)
        out_sys = kernel.tensor(dst, out_msg)
    else:
        t = blocks.transpose(1, 0, 3, 2)  # (j, dst, i, src)
        in_sys = src if in_msg is None else kernel.tensor(in_msg, src)
        out_sys = kernel.tensor(out_msg, dst)
    return ExtendedProcess(in_sys, out_sys, t.reshape(out_sys.dim, in_sys.dim))


def random_kraus(rng: np.random.Generator, d_in: int, d_out: int, n_out: int, rank: int = 2) -> list[list[np.ndarray]]:
    """Kraus families {K_(j, r)} of a random instrument, via a random isometry."""
    rows = d_out * n_out * rank
    z = rng.normal(size=(rows, d_in)) + 1j * rng.normal(size=(rows, d_in))
    q, _ = np.linalg.qr(z)
    ops = q[:, :d_in].reshape(n_out, rank, d_out, d_in)
    return [[ops[j, r] for r in range(rank)] for j in range(n_out)]


def random_locc(A: System, B: System, D: int, M: int, rng, inner: System | None = None) -> LoccMeasurement:
    """Random two-round protocol: Alice instrument, Bob instrument, Alice
    measurement, Bob final measurement. ``inner`` is the kept system on both sides."""
    msg = _message_system(D)
    a_inner = inner or A
    b_inner = inner or B
    da, db, dai, dbi = A.dim, B.dim, a_inner.dim, b_inner.dim
    qa, qb = int(round(da**0.5)), int(round(db**0.5))
    qai, qbi = int(round(dai**0.5)), int(round(dbi**0.5))
    out = kernel.classical(M)

    def fam(d_in, d_out, n_in, n_out):
        k = {}
        for i in range(n_in):
            for j, ops in enumerate(random_kraus(rng, d_in, d_out, n_out)):
                k[(i, j)] = ops
        return k

    a1 = instrument(A, a_inner, None, msg, "a", fam(qa, qai, 1, D))
    b1 = instrument(B, b_inner, msg, msg, "b", fam(qb, qbi, D, D))
    a2 = instrument(a_inner, kernel.TRIVIAL, msg, msg, "a", fam(qai, 1, D, D))
    b2 = instrument(b_inner, kernel.TRIVIAL, msg, out, "b", fam(qbi, 1, D, M))
    return LoccMeasurement(A, B, [a1, a2], [b1, b2])
