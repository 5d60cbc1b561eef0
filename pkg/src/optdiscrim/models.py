"""Theory plugins: classical simplices, quantum state spaces, and polytopes.

Every model realizes Vec_A as R^d. Quantum operators are stored in a real
orthonormal Hermitian basis (diagonal units, then symmetric and
antisymmetric off-diagonal pairs scaled by 1/sqrt(2)), so the trace pairing
of an effect and a state is the plain dot product. Composite quantum
systems use the product of the factor bases, which makes Kronecker products
of vectors agree with Kronecker products of operators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, UnsupportedModel, UnsupportedSystem

CONE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Hermitian vectorization


@lru_cache(maxsize=None)
def _atomic_basis(n: int) -> np.ndarray:
    basis = np.zeros((n * n, n, n), dtype=complex)
    s = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(n):
            k = i * n + j
            if i == j:
                basis[k, i, i] = 1.0
            elif i < j:
                basis[k, i, j] = s
                basis[k, j, i] = s
            else:
                # pairs with (j, i); sigma_y-like
                basis[k, j, i] = -1j * s
                basis[k, i, j] = 1j * s
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=None)
def hermitian_basis(dims: tuple[int, ...]) -> np.ndarray:
    """Orthonormal Hermitian basis for C^{dims[0]} ⊗ C^{dims[1]} ⊗ ..."""
    out = np.ones((1, 1, 1), dtype=complex)
    for n in dims:
        b = _atomic_basis(n)
        out = np.einsum("aij,bkl->abikjl", out, b).reshape(
            out.shape[0] * b.shape[0], out.shape[1] * n, out.shape[2] * n
        )
    out.setflags(write=False)
    return out


def _dims(dims) -> tuple[int, ...]:
    if isinstance(dims, (int, np.integer)):
        return (int(dims),)
    return tuple(int(d) for d in dims)


def vectorize(h, dims) -> np.ndarray:
    """Hermitian operator -> real coordinate vector."""
    dims = _dims(dims)
    basis = hermitian_basis(dims)
    h = np.asarray(h, dtype=complex)
    n = basis.shape[1]
    if h.shape != (n, n):
        raise DimensionMismatch(f"operator shape {h.shape} does not match dims {dims}")
    return np.real(np.einsum("kij,ji->k", basis, h))


def devectorize(v, dims) -> np.ndarray:
    dims = _dims(dims)
    basis = hermitian_basis(dims)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != basis.shape[0]:
        raise DimensionMismatch(f"vector length {v.shape[0]} does not match dims {dims}")
    return np.einsum("k,kij->ij", v, basis)


def superoperator(fn: Callable[[np.ndarray], np.ndarray], dims_in, dims_out=None) -> np.ndarray:
    """Real matrix of a Hermiticity-preserving linear map in the vectorized basis."""
    dims_in = _dims(dims_in)
    dims_out = dims_in if dims_out is None else _dims(dims_out)
    b_in = hermitian_basis(dims_in)
    cols = [vectorize(linalg.herm_part(fn(b)), dims_out) for b in b_in]
    return np.array(cols).T


def unitary_action(u, antiunitary: bool = False, dims=None) -> np.ndarray:
    """State-space map rho -> U rho U^dag (or U rho^T U^dag when anti-unitary)."""
    u = np.asarray(u, dtype=complex)
    dims = (u.shape[0],) if dims is None else _dims(dims)
    if antiunitary:
        return superoperator(lambda x: u @ x.T @ u.conj().T, dims)
    return superoperator(lambda x: u @ x @ u.conj().T, dims)


# ---------------------------------------------------------------------------
# Model descriptors


class ModelDescriptor:
    """Abstract theory plugin for one (possibly composite) system."""

    kind: str = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def contains_state(self, v, tol: float = CONE_TOL) -> bool:
        raise NotImplementedError

    def in_effect_cone(self, w, tol: float = CONE_TOL) -> bool:
        raise NotImplementedError

    def unit_effect(self) -> np.ndarray:
        raise NotImplementedError

    def effect_generators(self) -> np.ndarray:
        raise UnsupportedModel(f"{self.kind} model has no finite effect-cone generator list")

    def pure_states(self):
        raise NotImplementedError

    def contains_effect(self, w, tol: float = CONE_TOL) -> tuple[bool, bool]:
        """(in effect cone, feasible) where feasible means u - w is also an effect."""
        w = self._check_vec(w)
        inside = self.in_effect_cone(w, tol)
        return inside, inside and self.in_effect_cone(self.unit_effect() - w, tol)

    def _check_vec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim:
            raise DimensionMismatch(f"vector of length {v.shape[0]} for a model of dim {self.dim}")
        return v

    @property
    def polyhedral(self) -> bool:
        return False


@dataclass(frozen=True)
class ClassicalModel(ModelDescriptor):
    M: int
    kind: str = field(default="classical", init=False)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("classical system needs M >= 1")

    @property
    def dim(self) -> int:
        return self.M

    @property
    def polyhedral(self) -> bool:
        return True

    def contains_state(self, v, tol=CONE_TOL):
        return bool(np.all(self._check_vec(v) >= -tol))

    def in_effect_cone(self, w, tol=CONE_TOL):
        return bool(np.all(self._check_vec(w) >= -tol))

    def unit_effect(self):
        return np.ones(self.M)

    def effect_generators(self):
        return np.eye(self.M)

    def pure_states(self):
        return np.eye(self.M)


@dataclass(frozen=True)
class QuantumModel(ModelDescriptor):
    N: int
    kind: str = field(default="quantum", init=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("quantum system needs N >= 1")

    @property
    def dim(self) -> int:
        return self.N * self.N

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.N,)

    def contains_state(self, v, tol=CONE_TOL):
        return linalg.min_eigenvalue(devectorize(self._check_vec(v), self.dims)) >= -tol

    def in_effect_cone(self, w, tol=CONE_TOL):
        return self.contains_state(w, tol)

    def unit_effect(self):
        return vectorize(np.eye(self.N), self.dims)

    def pure_states(self):
        return PureStateSampler(self.dims)


class PureStateSampler:
    """Draws Haar-random rank-1 projectors, returned vectorized."""

    def __init__(self, dims: tuple[int, ...]):
        self.dims = dims
        self.n = int(np.prod(dims))

    def sample_vector(self, rng: np.random.Generator) -> np.ndarray:
        psi = rng.normal(size=self.n) + 1j * rng.normal(size=self.n)
        return psi / np.linalg.norm(psi)

    def sample_matrix(self, rng: np.random.Generator) -> np.ndarray:
        return linalg.projector(self.sample_vector(rng))

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        return vectorize(self.sample_matrix(rng), self.dims)


class PolytopeModel(ModelDescriptor):
    """Polyhedral cone generated by normalized state rays ``states``.

    The effect cone defaults to the full dual cone; its extreme rays are
    enumerated from (d-1)-subsets of the state generators and scaled so the
    largest outcome probability on a normalized pure state is 1.
    """

    kind = "polytope"

    def __init__(self, states, unit, effects=None, name: str = "polytope"):
        self.states = np.array(states, dtype=float)
        self.unit = np.array(unit, dtype=float).reshape(-1)
        self.name = name
        if self.states.ndim != 2 or self.states.shape[1] != self.unit.shape[0]:
            raise DimensionMismatch("state generators and unit effect disagree on dimension")
        self.effects = dual_cone_rays(self.states) if effects is None else np.array(effects, dtype=float)
        self.states.setflags(write=False)
        self.unit.setflags(write=False)
        self.effects.setflags(write=False)

    def __eq__(self, other):
        return (
            isinstance(other, PolytopeModel)
            and self.states.shape == other.states.shape
            and self.effects.shape == other.effects.shape
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.unit, other.unit)
            and np.array_equal(self.effects, other.effects)
        )

    def __hash__(self):
        return hash((self.name, self.states.tobytes(), self.unit.tobytes()))

    def __repr__(self):
        return f"PolytopeModel(name={self.name!r}, d={self.dim}, states={len(self.states)}, effects={len(self.effects)})"

    @property
    def dim(self) -> int:
        return self.unit.shape[0]

    @property
    def polyhedral(self) -> bool:
        return True

    def contains_state(self, v, tol=CONE_TOL):
        from .lp import cone_membership

        return cone_membership(self.states.T, self._check_vec(v), tol)

    def in_effect_cone(self, w, tol=CONE_TOL):
        w = self._check_vec(w)
        return bool(np.all(self.states @ w >= -tol))

    def unit_effect(self):
        return self.unit.copy()

    def effect_generators(self):
        return self.effects.copy()

    def pure_states(self):
        return self.states.copy()


def dual_cone_rays(gens, tol: float = 1e-9) -> np.ndarray:
    """Extreme rays of the dual of cone(gens), each scaled to max pairing 1."""
    gens = np.asarray(gens, dtype=float)
    d = gens.shape[1]
    if d == 1:
        return np.ones((1, 1)) / max(gens.max(), tol)
    rays: list[np.ndarray] = []
    for subset in itertools.combinations(range(len(gens)), d - 1):
        sub = gens[list(subset)]
        if np.linalg.matrix_rank(sub, tol) != d - 1:
            continue
        normal = np.linalg.svd(sub)[2][-1]
        vals = gens @ normal
        if np.all(vals >= -tol):
            pass
        elif np.all(vals <= tol):
            normal, vals = -normal, -vals
        else:
            continue
        ray = normal / vals.max()
        ray[np.abs(ray) < 1e-15] = 0.0
        if not any(np.allclose(ray, r, atol=1e-9) for r in rays):
            rays.append(ray)
    return np.array(rays)


def gbit_square() -> PolytopeModel:
    """Square state space: normalized pure states (1, ±1, ±1), listed cyclically."""
    states = [(1, 1, 1), (1, -1, 1), (1, -1, -1), (1, 1, -1)]
    return PolytopeModel(states, (1.0, 0.0, 0.0), name="gbit-square")


class CompositeModel(ModelDescriptor):
    """Tensor product of atomic models with the restrictions of the kernel.

    Allowed: any number of classical factors together with either quantum
    factors only, or a single polytope factor.
    """

    kind = "composite"

    def __init__(self, factors: Sequence[ModelDescriptor]):
        self.factors = tuple(factors)
        nonclassical = [f for f in self.factors if not isinstance(f, ClassicalModel)]
        if any(isinstance(f, CompositeModel) for f in self.factors):
            raise TypeError("CompositeModel factors must be atomic")
        polys = [f for f in nonclassical if isinstance(f, PolytopeModel)]
        if polys and len(nonclassical) > 1:
            raise UnsupportedSystem("polytope systems compose only with classical systems")
        self._nonclassical = nonclassical

    def __eq__(self, other):
        return isinstance(other, CompositeModel) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __repr__(self):
        return f"CompositeModel({list(self.factors)!r})"

    @property
    def dim(self) -> int:
        return int(np.prod([f.dim for f in self.factors])) if self.factors else 1

    @property
    def polyhedral(self) -> bool:
        return all(f.polyhedral for f in self.factors)

    @property
    def quantum_dims(self) -> tuple[int, ...]:
        return tuple(f.N for f in self._nonclassical if isinstance(f, QuantumModel))

    def _slices(self, v) -> np.ndarray:
        """Rows indexed by the classical labels, columns by the non-classical part."""
        v = self._check_vec(v)
        if not self.factors:
            return v.reshape(1, 1)
        shape = [f.dim for f in self.factors]
        t = v.reshape(shape)
        cl = [i for i, f in enumerate(self.factors) if isinstance(f, ClassicalModel)]
        nc = [i for i in range(len(self.factors)) if i not in cl]
        t = np.transpose(t, cl + nc)
        rows = int(np.prod([shape[i] for i in cl])) if cl else 1
        return t.reshape(rows, -1)

    def _in_cone(self, v, tol, effect: bool) -> bool:
        slices = self._slices(v)
        if not self._nonclassical:
            return bool(np.all(slices >= -tol))
        if isinstance(self._nonclassical[0], PolytopeModel):
            poly = self._nonclassical[0]
            test = poly.in_effect_cone if effect else poly.contains_state
            return all(test(row, tol) for row in slices)
        dims = self.quantum_dims
        return all(linalg.min_eigenvalue(devectorize(row, dims)) >= -tol for row in slices)

    def contains_state(self, v, tol=CONE_TOL):
        return self._in_cone(v, tol, effect=False)

    def in_effect_cone(self, w, tol=CONE_TOL):
        return self._in_cone(w, tol, effect=True)

    def unit_effect(self):
        out = np.ones(1)
        for f in self.factors:
            out = np.kron(out, f.unit_effect())
        return out

    def effect_generators(self):
        out = np.ones((1, 1))
        for f in self.factors:
            g = f.effect_generators()
            out = np.array([np.kron(a, b) for a in out for b in g])
        return out

    def pure_states(self):
        if self._nonclassical and all(isinstance(f, QuantumModel) for f in self._nonclassical) and len(
            self._nonclassical
        ) == len(self.factors):
            return PureStateSampler(self.quantum_dims)
        out = np.ones((1, 1))
        for f in self.factors:
            p = f.pure_states()
            if isinstance(p, PureStateSampler):
                raise UnsupportedModel("mixed quantum/classical composites have no pure-state list")
            out = np.array([np.kron(a, b) for a in out for b in p])
        return out

    @property
    def all_quantum(self) -> bool:
        return bool(self.factors) and all(isinstance(f, QuantumModel) for f in self.factors)


def tensor_models(a: ModelDescriptor, b: ModelDescriptor) -> ModelDescriptor:
    fa = a.factors if isinstance(a, CompositeModel) else (a,)
    fb = b.factors if isinstance(b, CompositeModel) else (b,)
    factors = fa + fb
    if len(factors) == 1:
        return factors[0]
    return CompositeModel(factors)


def quantum_dims(model: ModelDescriptor) -> tuple[int, ...]:
    """Operator dimensions of an all-quantum model (atomic or composite)."""
    if isinstance(model, QuantumModel):
        return model.dims
    if isinstance(model, CompositeModel) and model.all_quantum:
        return model.quantum_dims
    raise UnsupportedModel(f"{model!r} is not a quantum model")


def is_quantum(model: ModelDescriptor) -> bool:
    return isinstance(model, QuantumModel) or (isinstance(model, CompositeModel) and model.all_quantum)


# ---------------------------------------------------------------------------
# Module-level entry points


def contains_state(m: ModelDescriptor, v, tol: float = CONE_TOL) -> bool:
    return m.contains_state(v, tol)


def contains_effect(m: ModelDescriptor, w, tol: float = CONE_TOL) -> tuple[bool, bool]:
    return m.contains_effect(w, tol)


def unit_effect(m: ModelDescriptor) -> np.ndarray:
    return m.unit_effect()


def pure_states(m: ModelDescriptor):
    return m.pure_states()


def random_state(m: ModelDescriptor, rng: np.random.Generator, normalized: bool = True) -> np.ndarray:
    """A random state in the cone; normalized to unit discard value by default."""
    if is_quantum(m):
        dims = quantum_dims(m)
        n = int(np.prod(dims))
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        v = vectorize(a @ a.conj().T, dims)
    else:
        gens = _state_generators(m)
        v = rng.dirichlet(np.ones(len(gens))) @ gens
    if normalized:
        v = v / (m.unit_effect() @ v)
    return v


def _state_generators(m: ModelDescriptor) -> np.ndarray:
    if isinstance(m, CompositeModel):
        out = np.ones((1, 1))
        for f in m.factors:
            out = np.array([np.kron(a, b) for a in out for b in _state_generators(f)])
        return out
    p = m.pure_states()
    if isinstance(p, PureStateSampler):
        raise UnsupportedModel("quantum models have no finite state generator list")
    return p


def random_measurement(m: ModelDescriptor, M: int, rng: np.random.Generator) -> np.ndarray:
    """Random M-outcome measurement as an (M, d) array of effects summing to the unit."""
    u = m.unit_effect()
    if is_quantum(m):
        dims = quantum_dims(m)
        n = int(np.prod(dims))
        parts = []
        for _ in range(M):
            a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            parts.append(a @ a.conj().T * rng.uniform(0.05, 1.0))
        s = linalg.inv_sqrt(sum(parts))
        return np.array([vectorize(s @ p @ s, dims) for p in parts])
    gens = m.effect_generators()
    # mixture of random two-outcome splits {w, u - w} and trivial measurements
    pieces = []
    for _ in range(max(3, M + 1)):
        e = np.zeros((M, m.dim))
        if rng.random() < 0.8:
            w = gens[rng.integers(len(gens))]
            rest = u - w
            if not m.in_effect_cone(rest):
                w = w / _max_scale(m, w)
                rest = u - w
            a, b = rng.choice(M, size=2, replace=M < 2)
            e[a] += w
            e[b] += rest
        else:
            e[rng.integers(M)] = u
        pieces.append(e)
    weights = rng.dirichlet(np.ones(len(pieces)))
    return sum(wt * p for wt, p in zip(weights, pieces))


def _max_scale(m: ModelDescriptor, w) -> float:
    gens = _state_generators(m)
    vals = gens @ w / (gens @ m.unit_effect())
    return float(max(vals.max(), 1.0))
