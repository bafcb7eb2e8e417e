import numpy as np
import pytest

from hklearn import (
    CoefficientField,
    HyperGram,
    HyperKernelParams,
    InvalidInput,
    KrrConfig,
    NumericalFailure,
    assemble_hyper_gram,
    fit_krr,
    full_pair_list,
    krr_objective,
)


def _random_gram(rng, m, d=2):
    X = rng.standard_normal((m, d))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return assemble_hyper_gram(HyperKernelParams(1.0, 1.0, d), X)


def test_identity_gram_closed_form(rng):
    gram = HyperGram(np.eye(4), full_pair_list(2), 0.0)
    y = rng.standard_normal(4)
    beta = fit_krr(gram, y, KrrConfig(1.0))
    np.testing.assert_allclose(beta.values.ravel(), y / 2.0, rtol=1e-12)


def test_scalar_closed_form():
    gram = assemble_hyper_gram(HyperKernelParams(1.0, 1.0, 1), [[0.3]])
    kappa = gram.entries[0, 0]
    lam = 0.05
    beta = fit_krr(gram, [2.0], KrrConfig(lam))
    assert beta.values[0] == pytest.approx(2.0 / (kappa + lam), rel=1e-12)


def test_planted_recovery(rng):
    gram = _random_gram(rng, 8)
    planted = rng.standard_normal(64)
    y = gram.entries @ planted
    beta = fit_krr(gram, y, KrrConfig(1e-10))
    pred = gram.entries @ beta.values.ravel()
    assert np.max(np.abs(pred - y)) <= 1e-6


def test_direct_residual_bound(rng):
    for lam in (1e-6, 1e-3, 1.0):
        gram = _random_gram(rng, 6)
        y = rng.standard_normal(36)
        beta = fit_krr(gram, y, KrrConfig(lam))
        r = gram.entries @ beta.values.ravel() + (lam + beta.jitter_applied) * beta.values.ravel() - y
        assert np.linalg.norm(r) / max(1.0, np.linalg.norm(y)) <= 1e-8


def test_cg_agrees_with_direct(rng):
    gram = _random_gram(rng, 8)
    y = rng.standard_normal(64)
    direct = fit_krr(gram, y, KrrConfig(1e-2, solver="direct"))
    cg = fit_krr(gram, y, KrrConfig(1e-2, solver="cg", cg_tol=1e-12))
    np.testing.assert_allclose(
        cg.values, direct.values, rtol=1e-6, atol=1e-6 * np.abs(direct.values).max()
    )


def test_auto_solver_switches_on_size(rng):
    gram = _random_gram(rng, 4)
    y = rng.standard_normal(16)
    small_limit = KrrConfig(1e-2, solver="auto", direct_limit=4, cg_tol=1e-12)
    large_limit = KrrConfig(1e-2, solver="auto", direct_limit=1000)
    np.testing.assert_allclose(
        fit_krr(gram, y, small_limit).values,
        fit_krr(gram, y, large_limit).values,
        rtol=1e-6,
    )


def test_shrinkage_monotone_in_lambda(rng):
    gram = _random_gram(rng, 5)
    y = rng.standard_normal(25)
    norms = [
        np.linalg.norm(fit_krr(gram, y, KrrConfig(lam)).values)
        for lam in np.logspace(-5, 5, 11)
    ]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(norms, norms[1:]))


def test_objective_at_solution_beats_zero_and_perturbations(rng):
    gram = _random_gram(rng, 4)
    y = rng.standard_normal(16)
    lam = 0.1
    beta = fit_krr(gram, y, KrrConfig(lam)).values.ravel()
    at_fit = krr_objective(gram, beta, y, lam)
    assert at_fit <= np.dot(y, y) + 1e-12
    for _ in range(100):
        delta = rng.standard_normal(16)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert at_fit <= krr_objective(gram, beta + delta, y, lam) + 1e-12


def test_lambda_zero_accepted_with_jitter(rng):
    gram = _random_gram(rng, 3)
    y = rng.standard_normal(9)
    beta = fit_krr(gram, y, KrrConfig(0.0))
    assert np.all(np.isfinite(beta.values))


def test_singular_without_jitter_raises():
    # duplicated points give identical gram rows; lambda 0 and no retries
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    gram = assemble_hyper_gram(HyperKernelParams(1.0, 1.0, 2), X)
    with pytest.raises(NumericalFailure):
        fit_krr(gram, np.ones(9), KrrConfig(0.0, jitter_retries=0))


def test_negative_lambda_rejected():
    with pytest.raises(InvalidInput):
        KrrConfig(-1.0)


def test_size_mismatch_rejected(rng):
    gram = _random_gram(rng, 3)
    with pytest.raises(InvalidInput):
        fit_krr(gram, np.ones(4), KrrConfig(1.0))


def test_coefficient_field_shape_and_finiteness():
    pairs = full_pair_list(2)
    field = CoefficientField(np.arange(4.0), pairs, 2)
    assert field.to_matrix().shape == (2, 2)
    with pytest.raises(InvalidInput):
        CoefficientField(np.array([1.0, np.inf, 0.0, 0.0]), pairs, 2)
