"""Acceptance gate. Each criterion prints one PASS/FAIL line (visible with -s or -v)."""

import time

import numpy as np
import pytest

from optdiscrim import classes, kernel
from optdiscrim.discrimination import (
    Measurement,
    StatePreparation,
    brute_force_oracle,
    dual_certificate,
    solve,
    solve_covariant,
    solve_lp,
    success_probability,
)
from optdiscrim.models import ClassicalModel, QuantumModel, gbit_square, random_measurement, random_state
from optdiscrim.scenarios import BELL_KETS, generate_scenario, ket_states
from optdiscrim.symmetry import covariance_residual, symmetrize, verify_symmetry_theorem

SYMMETRIC = ["trine", "symmetric-pure(5)", "gbit-square", "classical-cyclic(4)"]


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail, t0):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - t0:.2f}s]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def test_criterion_1_symmetrization_preserves_ps(verdict):
    t0 = time.perf_counter()
    dev = cov = 0.0
    bad = []
    for name in SYMMETRIC:
        inst = generate_scenario(name)
        rep = verify_symmetry_theorem(inst.preparation, inst.symmetry, trials=100, seed=1, solve_optima=False)
        dev, cov = max(dev, rep.max_ps_deviation), max(cov, rep.max_covariance_residual)
        bad += rep.counterexamples
    elapsed = time.perf_counter() - t0
    ok = not bad and dev <= 1e-12 and cov <= 1e-10 and elapsed < 10
    verdict(1, ok, f"4x100 trials, max|dPs|={dev:.1e} (<=1e-12), max cov={cov:.1e} (<=1e-10), <10s", t0)


def test_criterion_2_covariant_optimum(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for name in SYMMETRIC:
        inst = generate_scenario(name)
        full = solve(inst.preparation)
        cov = solve_covariant(inst.preparation, inst.symmetry)
        worst = max(worst, abs(full.value - cov.value))
    verdict(2, worst <= 1e-8, f"max|P_all - P_cov|={worst:.1e} (<=1e-8)", t0)


def test_criterion_3_helstrom(verdict):
    t0 = time.perf_counter()
    inst = generate_scenario("helstrom")
    rep = solve(inst.preparation)
    elapsed = time.perf_counter() - t0
    overlap = 0.5  # |<0|+>|^2
    exact = 0.5 * (1 + np.sqrt(1 - overlap))
    err = abs(rep.value - exact)
    ok = err <= 1e-6 and rep.gap < 1e-6 and elapsed < 1
    verdict(3, ok, f"|P-P_exact|={err:.1e} (<=1e-6), gap={rep.gap:.1e} (<1e-6), <1s", t0)


def test_criterion_4_trine(verdict):
    t0 = time.perf_counter()
    inst = generate_scenario("trine")
    rep = solve(inst.preparation)
    cert = dual_certificate(rep.measurement, inst.preparation)
    err = abs(rep.value - 2 / 3)
    verdict(4, err <= 1e-6 and cert.feasible, f"|P-2/3|={err:.1e} (<=1e-6), certificate feasible={cert.feasible}", t0)


def test_criterion_5_lp_matches_bruteforce(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        M, d = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        A = kernel.System("A", ClassicalModel(d))
        rho = StatePreparation.from_priors(A, rng.dirichlet(np.ones(M)), rng.dirichlet(np.ones(d), size=M))
        worst = max(worst, abs(solve_lp(rho).value - brute_force_oracle(rho).value))
    G = kernel.System("A", gbit_square())
    for _ in range(20):
        M = int(rng.integers(1, 5))
        states = np.array([random_state(G.model, rng) for _ in range(M)])
        rho = StatePreparation.from_priors(G, rng.dirichlet(np.ones(M)), states)
        worst = max(worst, abs(solve_lp(rho).value - brute_force_oracle(rho).value))
    elapsed = time.perf_counter() - t0
    verdict(5, worst <= 1e-9 and elapsed < 30, f"50 classical + 20 gbit, max|LP-BF|={worst:.1e} (<=1e-9), <30s", t0)


def test_criterion_6_class_inclusions(verdict):
    t0 = time.perf_counter()
    A, B = kernel.System("A", QuantumModel(2)), kernel.System("B", QuantumModel(2))
    rng = np.random.default_rng(6)
    maps = [classes.random_positive_map(A, rng) for _ in range(100)]
    recon = 0.0
    slack = np.inf
    valid = True
    items = [classes.random_sequential(A, B, 2, int(rng.integers(2, 5)), rng) for _ in range(50)]
    items += [classes.random_locc(A, B, 2, int(rng.integers(2, 5)), rng) for _ in range(20)]
    for x in items:
        sep = classes.seq_to_separable(x) if isinstance(x, classes.SequentialMeasurement) else classes.locc_to_separable(x)
        e = x.measurement()
        recon = max(recon, float(np.max(np.abs(sep.effects() - e.effects))))
        valid = valid and sep.is_valid()
        for f in maps:
            s, norm = classes.pt_residual(e, f, B)
            slack = min(slack, s)
            valid = valid and norm <= 1e-10
    ok = valid and recon <= 1e-12 and slack >= -1e-10
    verdict(6, ok, f"50 seq + 20 LOCC, recon={recon:.1e} (<=1e-12), min PT slack={slack:.1e} (>=-1e-10)", t0)


def test_criterion_7_bell_witness(verdict):
    t0 = time.perf_counter()
    A, B = kernel.System("A", QuantumModel(2)), kernel.System("B", QuantumModel(2))
    AB = kernel.tensor(A, B)
    w = classes.pt_witness(Measurement(AB, ket_states(BELL_KETS, (2, 2))), A, B, samples=200)
    z = np.eye(4)
    product = Measurement(AB, ket_states(z, (2, 2)))
    try:
        classes.pt_witness(product, A, B)
        product_rejected = False
    except classes.NotFound:
        product_rejected = True
    ok = (
        w.determinism_residual <= 1e-10
        and w.product_pairing_min >= -1e-10
        and w.positivity_min >= -1e-10
        and w.violation <= -0.1
        and abs(w.pairing + 0.5) <= 1e-10
        and product_rejected
    )
    detail = (
        f"det={w.determinism_residual:.1e} (<=1e-10), 200 product samples min={w.product_pairing_min:.2f}, "
        f"min eig={w.violation:.3f} (<=-0.1), pairing={w.pairing:.3f} (=-1/2), ZxZ NotFound={product_rejected}"
    )
    verdict(7, ok, detail, t0)


def test_criterion_8_kernel_laws(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    S = [kernel.System(x, QuantumModel(n)) for x, n in zip("ABCDEF", (2, 2, 3, 2, 1, 2))]

    def proc(a, b):
        return kernel.ExtendedProcess(a, b, rng.normal(size=(b.dim, a.dim)))

    def rel(x, y):
        return float(np.max(np.abs(x.matrix - y.matrix)) / max(1.0, np.abs(x.matrix).max()))

    worst = 0.0
    A, B, C, D, E, F = S
    for _ in range(100):
        f, g, h = proc(A, B), proc(B, C), proc(C, D)
        worst = max(worst, rel(kernel.compose_seq(kernel.identity(A), f), f), rel(kernel.compose_seq(f, kernel.identity(B)), f))
        worst = max(worst, rel(kernel.compose_seq(kernel.compose_seq(f, g), h), kernel.compose_seq(f, kernel.compose_seq(g, h))))
        p, q = proc(D, E), proc(E, F)
        lhs = kernel.compose_seq(kernel.compose_par(f, p), kernel.compose_par(g, q))
        worst = max(worst, rel(lhs, kernel.compose_par(kernel.compose_seq(f, g), kernel.compose_seq(p, q))))
        sw = kernel.compose_seq(kernel.swap(A, B), kernel.swap(B, A))
        worst = max(worst, rel(sw, kernel.identity(kernel.tensor(A, B))))
        nat_l = kernel.compose_seq(kernel.swap(A, D), kernel.compose_par(p, f))
        nat_r = kernel.compose_seq(kernel.compose_par(f, p), kernel.swap(B, E))
        worst = max(worst, rel(nat_l, nat_r))
    verdict(8, worst <= 1e-12, f"identity/associativity/interchange/swap on 100 draws, max rel err={worst:.1e} (<=1e-12)", t0)


def test_criterion_9_symmetrizer_algebra(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    insts = [generate_scenario(n) for n in SYMMETRIC]
    worst = cov = 0.0
    for k in range(100):
        inst = insts[k % len(insts)]
        s, rho = inst.symmetry, inst.preparation
        e = Measurement(rho.system, random_measurement(rho.model, rho.M, rng))
        f = Measurement(rho.system, random_measurement(rho.model, rho.M, rng))
        lam = rng.uniform()
        es, fs = symmetrize(e, s), symmetrize(f, s)
        mix = symmetrize(Measurement(rho.system, lam * e.effects + (1 - lam) * f.effects), s)
        worst = max(
            worst,
            float(np.max(np.abs(symmetrize(es, s).effects - es.effects))),
            float(np.max(np.abs(mix.effects - (lam * es.effects + (1 - lam) * fs.effects)))),
            abs(success_probability(es, rho) - success_probability(e, rho)),
        )
        cov = max(cov, covariance_residual(es, s))
    verdict(9, worst <= 1e-12 and cov <= 1e-10, f"100 pairs, idempotence/linearity/P_S max err={worst:.1e} (<=1e-12)", t0)
