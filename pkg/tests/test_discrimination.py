import math

import numpy as np
import pytest

from optdiscrim import kernel, linalg
from optdiscrim.discrimination import (
    Measurement,
    StatePreparation,
    brute_force_oracle,
    dual_certificate,
    solve,
    solve_covariant,
    solve_lp,
    solve_quantum,
    success_probability,
)
from optdiscrim.errors import NoConvergence, NotCovariant, TooLarge, UnsupportedModel
from optdiscrim.models import ClassicalModel, QuantumModel, devectorize, gbit_square, random_measurement, random_state
from optdiscrim.scenarios import generate_scenario
from optdiscrim.symmetry import SymmetrySetup

from conftest import ket_vec


def classical_optimum(states):
    # guess the label maximizing rho_m(j) for each observed symbol j
    return float(np.sum(np.max(states, axis=0)))


def srm(states, dims):
    rhos = [devectorize(s, dims) for s in states]
    inv = linalg.inv_sqrt(sum(rhos))
    return np.array([np.real(inv @ r @ inv) for r in rhos])


def test_success_probability_examples(cbit, qubit):
    prep = StatePreparation(cbit, np.eye(2) / 2)
    assert success_probability(Measurement(cbit, np.eye(2)), prep) == 1.0
    prep = StatePreparation(cbit, np.array([[0.1, 0.3], [0.5, 0.1]]))
    e = Measurement(cbit, np.array([[1.0, 1.0], [0.0, 0.0]]))
    assert success_probability(e, prep) == pytest.approx(0.4, abs=1e-15)


def test_trine_srm_is_two_thirds():
    inst = generate_scenario("trine")
    rho = inst.preparation
    e = srm(rho.states, (2,))
    from optdiscrim.models import vectorize

    meas = Measurement(rho.system, np.array([vectorize(x, (2,)) for x in e]))
    assert meas.is_valid()
    assert success_probability(meas, rho) == pytest.approx(2 / 3, abs=1e-12)


def test_classical_lp_example(cbit):
    prep = StatePreparation.from_priors(cbit, [0.5, 0.5], [[0.8, 0.2], [0.3, 0.7]])
    assert solve_lp(prep).value == pytest.approx(0.75, abs=1e-12)
    assert brute_force_oracle(prep).value == pytest.approx(0.75, abs=1e-12)


def test_single_outcome(cbit, qubit):
    prep = StatePreparation(cbit, [[0.4, 0.6]])
    rep = solve_lp(prep)
    assert rep.value == pytest.approx(1.0)
    assert np.allclose(rep.measurement.effects, [[1, 1]])
    qprep = StatePreparation(qubit, [ket_vec([1, 1])])
    assert solve_quantum(qprep).value == pytest.approx(1.0, abs=1e-12)


def test_identical_states_give_max_prior(cbit):
    prep = StatePreparation.from_priors(cbit, [0.2, 0.5, 0.3], [[0.5, 0.5]] * 3)
    assert brute_force_oracle(prep).value == pytest.approx(0.5, abs=1e-12)
    assert solve_lp(prep).value == pytest.approx(0.5, abs=1e-12)


def test_lp_against_closed_form(rng):
    for _ in range(40):
        M, d = rng.integers(1, 5), rng.integers(1, 6)
        A = kernel.System("A", ClassicalModel(int(d)))
        prep = StatePreparation.from_priors(A, rng.dirichlet(np.ones(M)), rng.dirichlet(np.ones(d), size=M))
        assert solve_lp(prep).value == pytest.approx(classical_optimum(prep.states), abs=1e-10)


def test_gbit_lp_equals_bruteforce(gbit):
    prep = StatePreparation.from_priors(gbit, np.full(4, 0.25), gbit_square().states)
    assert solve_lp(prep).value == pytest.approx(brute_force_oracle(prep).value, abs=1e-9)


def test_lp_dominates_random_measurements(gbit, rng):
    prep = StatePreparation.from_priors(gbit, rng.dirichlet(np.ones(3)), [random_state(gbit.model, rng) for _ in range(3)])
    best = solve_lp(prep).value
    for _ in range(500):
        e = Measurement(gbit, random_measurement(gbit.model, 3, rng))
        assert success_probability(e, prep) <= best + 1e-10
    assert best >= max(prep.priors) - 1e-12


def test_helstrom_closed_form():
    rho = generate_scenario("helstrom").preparation
    r1, r2 = (devectorize(s, (2,)) for s in rho.states)
    oracle = 0.5 + 0.5 * linalg.trace_norm(r1 - r2)  # states already carry their 1/2 priors
    rep = solve_quantum(rho)
    assert rep.value == pytest.approx(oracle, abs=1e-9)
    assert rep.value == pytest.approx((1 + 1 / math.sqrt(2)) / 2, abs=1e-9)
    assert rep.gap < 1e-8


def test_trine_solver_and_certificate():
    rho = generate_scenario("trine").preparation
    rep = solve_quantum(rho)
    assert rep.value == pytest.approx(2 / 3, abs=1e-9)
    cert = dual_certificate(rep.measurement, rho)
    assert cert.feasible
    assert cert.bound == pytest.approx(2 / 3, abs=1e-9)
    Y = cert.Y
    for s in rho.states:
        assert np.linalg.eigvalsh(Y - devectorize(s, (2,))).min() >= -1e-8


def test_certificate_for_orthogonal_states(qubit):
    rho = StatePreparation.from_priors(qubit, [0.5, 0.5], [ket_vec([1, 0]), ket_vec([0, 1])])
    e = Measurement(qubit, np.array([ket_vec([1, 0]), ket_vec([0, 1])]))
    cert = dual_certificate(e, rho)
    assert cert.feasible and cert.bound == pytest.approx(1.0, abs=1e-14)


def test_weak_duality(rng, qubit):
    for _ in range(20):
        rho = StatePreparation.from_priors(qubit, rng.dirichlet(np.ones(3)), [random_state(qubit.model, rng) for _ in range(3)])
        opt = solve_quantum(rho)
        e = Measurement(qubit, random_measurement(qubit.model, 3, rng))
        cert = dual_certificate(e, rho)
        assert (not cert.feasible) or cert.bound >= success_probability(e, rho) - 1e-12
        assert cert.shifted_bound >= opt.value - 1e-9
        assert success_probability(e, rho) <= opt.dual_bound + 1e-9


def test_symmetric_pure_gram_oracle():
    # optimum for symmetric pure states via Gram eigenvalues: (sum sqrt(lambda_k))^2 / n^2
    for n in (3, 4, 5, 7):
        rho = generate_scenario(f"symmetric-pure({n})").preparation
        kets = [np.array([1, np.exp(2j * np.pi * k / n)]) / math.sqrt(2) for k in range(n)]
        gram = np.array([[np.vdot(a, b) for b in kets] for a in kets])
        lam = np.clip(np.linalg.eigvalsh(gram), 0, None)
        oracle = np.sum(np.sqrt(lam)) ** 2 / n**2
        assert solve_quantum(rho).value == pytest.approx(oracle, abs=1e-8)


def test_report_invariants(rng, qubit, gbit):
    for rho in [
        generate_scenario("trine").preparation,
        generate_scenario("gbit-square").preparation,
        generate_scenario("classical-random(3,4,7)").preparation,
    ]:
        for rep in [solve(rho)]:
            assert rep.measurement.is_valid()
            assert success_probability(rep.measurement, rho) == pytest.approx(rep.value, abs=1e-12)
            assert 0 <= rep.value <= 1 + 1e-10


def test_nonconvergence_carries_report():
    rho = generate_scenario("symmetric-pure(5)").preparation
    with pytest.raises(NoConvergence) as info:
        solve_quantum(rho, tol=1e-15, max_iter=0)
    assert info.value.report is not None


def test_solver_model_checks(qubit, cbit):
    with pytest.raises(UnsupportedModel):
        solve_lp(StatePreparation(qubit, [ket_vec([1, 0])]))
    with pytest.raises(UnsupportedModel):
        solve_quantum(StatePreparation(cbit, [[0.5, 0.5]]))


def test_bruteforce_budget():
    A = kernel.System("A", ClassicalModel(6))
    rng = np.random.default_rng(0)
    prep = StatePreparation.from_priors(A, np.full(6, 1 / 6), rng.dirichlet(np.ones(6), size=6))
    with pytest.raises(TooLarge):
        brute_force_oracle(prep, budget=10)


def test_covariant_solver_agreement():
    for name in ["trine", "gbit-square", "classical-cyclic(4)", "symmetric-pure(5)", "helstrom"]:
        inst = generate_scenario(name)
        full, cov = solve(inst.preparation), solve_covariant(inst.preparation, inst.symmetry)
        assert cov.value == pytest.approx(full.value, abs=1e-8)
        assert cov.covariant


def test_covariant_trivial_group(cbit):
    prep = StatePreparation.from_priors(cbit, [0.5, 0.5], [[0.8, 0.2], [0.3, 0.7]])
    with pytest.warns(UserWarning, match="not transitive"):
        rep = solve_covariant(prep, SymmetrySetup.trivial(cbit, 2))
    assert rep.value == pytest.approx(0.75, abs=1e-12)


def test_covariant_rejects_noncovariant():
    inst = generate_scenario("trine")
    prep = StatePreparation.from_priors(inst.system, [0.5, 0.3, 0.2], inst.preparation.states * 3)
    with pytest.raises(NotCovariant):
        solve_covariant(prep, inst.symmetry)


def test_preparation_problems(cbit):
    prep = StatePreparation(cbit, [[0.4, 0.1], [0.1, 0.3]])
    assert any("not normalized" in p for p in prep.problems())
    bad = StatePreparation(cbit, [[1.2, -0.2]])
    assert not bad.is_valid()
