from pathlib import Path

import numpy as np
import pytest

from optdiscrim import kernel
from optdiscrim.models import ClassicalModel, QuantumModel, gbit_square, vectorize

DATA = Path(__file__).parent / "data"


def random_hermitian(rng, n, complex_=True):
    a = rng.normal(size=(n, n))
    if complex_:
        a = a + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def ket_vec(k, dims=(2,)):
    k = np.asarray(k, dtype=complex)
    k = k / np.linalg.norm(k)
    return vectorize(np.outer(k, k.conj()), dims)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def qubit():
    return kernel.System("A", QuantumModel(2))


@pytest.fixture
def qubit_b():
    return kernel.System("B", QuantumModel(2))


@pytest.fixture
def cbit():
    return kernel.System("A", ClassicalModel(2))


@pytest.fixture
def gbit():
    return kernel.System("A", gbit_square())
