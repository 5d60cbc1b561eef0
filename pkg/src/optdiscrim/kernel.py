"""Finite-dimensional process calculus.

An ``ExtendedProcess`` is a real matrix from Vec_A to Vec_B. States have the
trivial input, effects the trivial output, scalars both. Sequential
composition is matrix multiplication, parallel composition is the Kronecker
product. Feasibility is a predicate supplied by the models, never enforced
on construction, because symmetrization and the PT construction work with
extended (possibly unphysical) processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import SystemMismatch, UnsupportedSystem
from .models import ClassicalModel, CompositeModel, ModelDescriptor

DET_TOL = 1e-10
EQ_TOL = 1e-12


@dataclass(frozen=True)
class System:
    label: str
    model: ModelDescriptor
    factors: tuple["System", ...] = ()

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def is_trivial(self) -> bool:
        return isinstance(self.model, CompositeModel) and not self.model.factors

    @property
    def atoms(self) -> tuple["System", ...]:
        if self.factors:
            return self.factors
        return () if self.is_trivial else (self,)

    @property
    def is_classical(self) -> bool:
        return all(isinstance(a.model, ClassicalModel) for a in self.atoms)

    def __matmul__(self, other: "System") -> "System":
        return tensor(self, other)

    def __str__(self):
        return self.label

    def same_as(self, other: "System") -> bool:
        return self.label == other.label and self.dim == other.dim


TRIVIAL = System("I", CompositeModel(()))


def classical(M: int, label: str | None = None) -> System:
    return System(label or f"C{M}", ClassicalModel(M))


def tensor(a: System, b: System) -> System:
    atoms = a.atoms + b.atoms
    if not atoms:
        return TRIVIAL
    if len(atoms) == 1:
        return atoms[0]
    model = CompositeModel(tuple(x.model for x in atoms))
    return System("⊗".join(x.label for x in atoms), model, atoms)


def tensor_all(systems: Sequence[System]) -> System:
    out = TRIVIAL
    for s in systems:
        out = tensor(out, s)
    return out


@dataclass(frozen=True, eq=False)
class ExtendedProcess:
    input: System
    output: System
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = linalg.as_real(self.matrix)
        if m.ndim == 1:
            m = m.reshape(self.output.dim, self.input.dim)
        if m.shape != (self.output.dim, self.input.dim):
            raise SystemMismatch(
                f"matrix shape {m.shape} does not match {self.input.label}->{self.output.label} "
                f"({self.output.dim}x{self.input.dim})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    # Vec structure
    def __add__(self, other: "ExtendedProcess") -> "ExtendedProcess":
        _same_type(self, other)
        return ExtendedProcess(self.input, self.output, self.matrix + other.matrix)

    def __sub__(self, other: "ExtendedProcess") -> "ExtendedProcess":
        _same_type(self, other)
        return ExtendedProcess(self.input, self.output, self.matrix - other.matrix)

    def __mul__(self, a: float) -> "ExtendedProcess":
        return ExtendedProcess(self.input, self.output, float(a) * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other: "ExtendedProcess") -> "ExtendedProcess":
        """``g @ f`` is g after f."""
        return compose_seq(other, self)

    def equals(self, other: "ExtendedProcess", tol: float = EQ_TOL) -> bool:
        return (
            self.input.same_as(other.input)
            and self.output.same_as(other.output)
            and bool(np.max(np.abs(self.matrix - other.matrix), initial=0.0) <= tol)
        )

    @property
    def is_state(self) -> bool:
        return self.input.is_trivial

    @property
    def is_effect(self) -> bool:
        return self.output.is_trivial

    def vector(self) -> np.ndarray:
        """Coordinates of a state (column) or effect (row)."""
        if self.is_state:
            return self.matrix[:, 0].copy()
        if self.is_effect:
            return self.matrix[0].copy()
        raise ValueError("only states and effects have a vector form")

    def scalar(self) -> float:
        if not (self.is_state and self.is_effect):
            raise ValueError("not a scalar")
        return float(self.matrix[0, 0])


def _same_type(f: ExtendedProcess, g: ExtendedProcess) -> None:
    if not (f.input.same_as(g.input) and f.output.same_as(g.output)):
        raise SystemMismatch(f"cannot add {f.input}->{f.output} and {g.input}->{g.output}")


def state(system: System, v) -> ExtendedProcess:
    return ExtendedProcess(TRIVIAL, system, np.asarray(v, dtype=float).reshape(-1, 1))


def effect(system: System, w) -> ExtendedProcess:
    return ExtendedProcess(system, TRIVIAL, np.asarray(w, dtype=float).reshape(1, -1))


def scalar(a: float) -> ExtendedProcess:
    return ExtendedProcess(TRIVIAL, TRIVIAL, np.array([[float(a)]]))


def identity(system: System) -> ExtendedProcess:
    return ExtendedProcess(system, system, np.eye(system.dim))


def discard(system: System) -> ExtendedProcess:
    return effect(system, system.model.unit_effect())


def compose_seq(f: ExtendedProcess, g: ExtendedProcess) -> ExtendedProcess:
    """g ∘ f: run ``f`` then ``g``."""
    if not f.output.same_as(g.input):
        raise SystemMismatch(f"output {f.output} of first process does not match input {g.input}")
    return ExtendedProcess(f.input, g.output, g.matrix @ f.matrix)


def compose_par(f: ExtendedProcess, g: ExtendedProcess) -> ExtendedProcess:
    return ExtendedProcess(
        tensor(f.input, g.input), tensor(f.output, g.output), linalg.kron(f.matrix, g.matrix)
    )


def swap(a: System, b: System) -> ExtendedProcess:
    """Permutation Vec_{A⊗B} -> Vec_{B⊗A} sending x⊗y to y⊗x."""
    ab = tensor(a, b)
    try:
        ba = tensor(b, a)
    except UnsupportedSystem as exc:
        raise UnsupportedSystem(f"no tensor factorization for {b}⊗{a}") from exc
    da, db = a.dim, b.dim
    p = np.zeros((da * db, da * db))
    for i in range(da):
        for j in range(db):
            p[j * da + i, i * db + j] = 1.0
    return ExtendedProcess(ab, ba, p)


def is_deterministic(f: ExtendedProcess, model=None, tol: float = DET_TOL) -> bool:
    lhs = f.output.model.unit_effect() @ f.matrix
    return bool(np.max(np.abs(lhs - f.input.model.unit_effect()), initial=0.0) <= tol)


def determinism_residual(f: ExtendedProcess) -> float:
    lhs = f.output.model.unit_effect() @ f.matrix
    return float(np.max(np.abs(lhs - f.input.model.unit_effect()), initial=0.0))


# ---------------------------------------------------------------------------
# Classical structure


@dataclass(frozen=True, eq=False)
class ClassicalStructure:
    """Basis states/effects of a classical system with its cup, cap and chi."""

    system: System
    cup: ExtendedProcess
    cap: ExtendedProcess

    @classmethod
    def canonical(cls, M: int) -> "ClassicalStructure":
        c = classical(M)
        flat = np.eye(M).reshape(-1)
        cc = tensor(c, c)
        return cls(c, state(cc, flat), effect(cc, flat))

    @property
    def M(self) -> int:
        return self.system.dim

    @property
    def basis_states(self) -> list[ExtendedProcess]:
        return [state(self.system, row) for row in np.eye(self.M)]

    @property
    def basis_effects(self) -> list[ExtendedProcess]:
        return [effect(self.system, row) for row in np.eye(self.M)]

    @property
    def chi(self) -> ExtendedProcess:
        return state(self.system, np.ones(self.M))


def yank_check(cs: ClassicalStructure, tol: float = EQ_TOL) -> bool:
    c = cs.system
    idc = identity(c)
    left = compose_seq(compose_par(idc, cs.cup), compose_par(cs.cap, idc))
    right = compose_seq(compose_par(cs.cup, idc), compose_par(idc, cs.cap))
    return left.equals(idc, tol) and right.equals(idc, tol)


# ---------------------------------------------------------------------------
# Measurements as processes into a classical system


def measurement_to_process(effects: Sequence[ExtendedProcess]) -> ExtendedProcess:
    if not effects:
        raise SystemMismatch("a measurement needs at least one effect")
    a = effects[0].input
    for e in effects:
        if not e.is_effect or not e.input.same_as(a):
            raise SystemMismatch("all effects must be effects on the same system")
    return ExtendedProcess(a, classical(len(effects)), np.vstack([e.matrix for e in effects]))


def process_to_effects(e: ExtendedProcess) -> list[ExtendedProcess]:
    if not e.output.is_classical:
        raise SystemMismatch(f"output {e.output} is not classical")
    return [effect(e.input, row) for row in e.matrix]


def is_measurement(effects, model=None, tol: float = DET_TOL) -> bool:
    """Every e_m lies in the effect cone and the e_m sum to the discarding effect."""
    if isinstance(effects, ExtendedProcess):
        effects = process_to_effects(effects)
    if not effects:
        return False
    a = effects[0].input
    model = a.model if model is None else model
    total = np.zeros(a.dim)
    for e in effects:
        if not e.input.same_as(a):
            return False
        w = e.vector()
        if not model.in_effect_cone(w, tol):
            return False
        total = total + w
    return bool(np.max(np.abs(total - model.unit_effect())) <= tol)
