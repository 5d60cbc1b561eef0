"""Canonical discrimination instances.

Every generator returns a fully validated ``DiscriminationInstance``; the
``gen`` subcommand writes them out with ``fileformat.emit``.
"""

from __future__ import annotations

import re

import numpy as np

from . import classes, kernel
from .discrimination import DiscriminationInstance, Measurement, StatePreparation
from .errors import UnknownScenario
from .models import ClassicalModel, QuantumModel, gbit_square, unitary_action, vectorize
from .symmetry import FiniteGroup, OutcomeAction, StateSpaceAction, SymmetrySetup


def qubit(label: str = "A") -> kernel.System:
    return kernel.System(label, QuantumModel(2))


def quantum_system(dims) -> kernel.System:
    """Single system "A", or "A⊗B" for a bipartite dims pair."""
    dims = [int(d) for d in dims]
    if len(dims) == 1:
        return kernel.System("A", QuantumModel(dims[0]))
    if len(dims) == 2:
        return kernel.tensor(kernel.System("A", QuantumModel(dims[0])), kernel.System("B", QuantumModel(dims[1])))
    raise UnknownScenario("only single and bipartite quantum systems are supported")


def ket_states(kets, dims) -> np.ndarray:
    return np.array([vectorize(np.outer(k, np.conj(k)), dims) for k in kets])


def ry(phi: float) -> np.ndarray:
    return np.array([[np.cos(phi / 2), -np.sin(phi / 2)], [np.sin(phi / 2), np.cos(phi / 2)]])


def _cyclic_setup(system, n: int, generator: np.ndarray) -> SymmetrySetup:
    g = FiniteGroup.cyclic(n)
    maps = [np.linalg.matrix_power(generator, k) for k in range(n)]
    return SymmetrySetup(g, OutcomeAction.cyclic_shift(g, n), StateSpaceAction(g, maps), system=system)


def helstrom() -> DiscriminationInstance:
    A = qubit()
    kets = [np.array([1.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2)]
    prep = StatePreparation.from_priors(A, [0.5, 0.5], ket_states(kets, (2,)))
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    setup = _cyclic_setup(A, 2, unitary_action(hadamard, dims=(2,)))
    return DiscriminationInstance(prep, setup, name="helstrom")


def trine() -> DiscriminationInstance:
    A = qubit()
    kets = [ry(2 * np.pi * k / 3) @ np.array([1.0, 0.0]) for k in range(3)]
    prep = StatePreparation.from_priors(A, np.full(3, 1 / 3), ket_states(kets, (2,)))
    setup = _cyclic_setup(A, 3, unitary_action(ry(2 * np.pi / 3), dims=(2,)))
    return DiscriminationInstance(prep, setup, name="trine")


def symmetric_pure(n: int = 5) -> DiscriminationInstance:
    """n equatorial qubit states (|0> + w^k |1>)/sqrt2 with the Z_n phase symmetry."""
    n = int(n)
    if n < 2:
        raise UnknownScenario("symmetric-pure needs n >= 2")
    A = qubit()
    w = np.exp(2j * np.pi / n)
    kets = [np.array([1.0, w**k]) / np.sqrt(2) for k in range(n)]
    prep = StatePreparation.from_priors(A, np.full(n, 1 / n), ket_states(kets, (2,)))
    setup = _cyclic_setup(A, n, unitary_action(np.diag([1.0, w]), dims=(2,)))
    return DiscriminationInstance(prep, setup, name=f"symmetric-pure({n})")


def gbit_square_instance() -> DiscriminationInstance:
    model = gbit_square()
    A = kernel.System("A", model)
    prep = StatePreparation.from_priors(A, np.full(4, 0.25), model.states)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    return DiscriminationInstance(prep, _cyclic_setup(A, 4, rot), name="gbit-square")


def classical_random(M: int = 3, d: int = 4, seed: int = 0) -> DiscriminationInstance:
    M, d = int(M), int(d)
    rng = np.random.default_rng(int(seed))
    A = kernel.System("A", ClassicalModel(d))
    prep = StatePreparation.from_priors(A, rng.dirichlet(np.ones(M)), rng.dirichlet(np.ones(d), size=M))
    return DiscriminationInstance(prep, name=f"classical-random({M},{d},{seed})")


def classical_cyclic(M: int = 4, seed: int = 0) -> DiscriminationInstance:
    """Cyclic shifts of one random distribution on M points, with the Z_M symmetry."""
    M = int(M)
    rng = np.random.default_rng(int(seed))
    base = rng.dirichlet(np.ones(M))
    A = kernel.System("A", ClassicalModel(M))
    prep = StatePreparation.from_priors(A, np.full(M, 1 / M), np.array([np.roll(base, k) for k in range(M)]))
    shift = np.roll(np.eye(M), 1, axis=0)
    return DiscriminationInstance(prep, _cyclic_setup(A, M, shift), name=f"classical-cyclic({M},{seed})")


BELL_KETS = np.array(
    [[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, -1.0], [0.0, 1.0, 1.0, 0.0], [0.0, 1.0, -1.0, 0.0]]
) / np.sqrt(2)


def bell_measurement() -> DiscriminationInstance:
    AB = quantum_system((2, 2))
    bell = ket_states(BELL_KETS, (2, 2))
    prep = StatePreparation.from_priors(AB, np.full(4, 0.25), bell)
    return DiscriminationInstance(prep, class_tag="pt", measurement=Measurement(AB, bell), name="bell-measurement")


def product_measurement() -> DiscriminationInstance:
    """Computational basis states of two qubits with the sequential Z⊗Z measurement."""
    AB = quantum_system((2, 2))
    A, B = AB.atoms
    z = ket_states(np.eye(2), (2,))
    branches = []
    for i in range(2):
        b = np.zeros((4, B.dim))
        b[2 * i : 2 * i + 2] = z
        branches.append(b)
    sm = classes.make_sequential(A, B, z, branches)
    prep = StatePreparation.from_priors(AB, np.full(4, 0.25), ket_states(np.eye(4), (2, 2)))
    return DiscriminationInstance(
        prep, class_tag="sequential", measurement=sm.measurement(), class_data=sm, name="product-zz"
    )


SCENARIOS = {
    "helstrom": helstrom,
    "trine": trine,
    "symmetric-pure": symmetric_pure,
    "gbit-square": gbit_square_instance,
    "classical-random": classical_random,
    "classical-cyclic": classical_cyclic,
    "bell-measurement": bell_measurement,
    "product-zz": product_measurement,
}

_CALL = re.compile(r"^([a-z\-]+)(?:\(([^)]*)\))?$")


def generate_scenario(name: str, *params) -> DiscriminationInstance:
    """``name`` may carry its parameters, e.g. ``symmetric-pure(5)``."""
    m = _CALL.match(name.strip())
    if not m or m.group(1) not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()] + [str(p) for p in params]
    try:
        nums = [int(a) for a in args]
    except ValueError as exc:
        raise UnknownScenario(f"scenario parameters must be integers, got {args}") from exc
    try:
        return SCENARIOS[m.group(1)](*nums)
    except TypeError as exc:
        raise UnknownScenario(f"bad parameters for {m.group(1)}: {exc}") from exc
