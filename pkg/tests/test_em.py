import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import normal_equations_ols
from pfmr.core import (
    STRUCTURES,
    ComponentParams,
    Dataset,
    DegeneracyError,
    MixtureModel,
    StaticWeights,
)
from pfmr.covariance import ScatterInput, estimate_sigma
from pfmr.em import (
    EmConfig,
    aitken_stop,
    e_step,
    fit,
    log_likelihood,
    m_step_coefficients,
    m_step_weights_static,
)
from pfmr.selection import kmeans_init, random_init


def _scalar_model(means, pi, var=1.0):
    comps = tuple(ComponentParams(np.array([[m]]), np.array([[var]])) for m in means)
    return MixtureModel("EII", comps, StaticWeights(np.array(pi)))


def _scalar_data(y):
    y = np.asarray(y, float).reshape(-1, 1)
    return Dataset(y, np.zeros((len(y), 0)))


def test_e_step_single_component():
    data = _scalar_data([0.0, 1.0, 5.0])
    assert np.all(e_step(_scalar_model([0.0], [1.0]), data) == 1.0)


def test_e_step_identical_components():
    data = _scalar_data(np.linspace(-3, 3, 7))
    tau = e_step(_scalar_model([0.5, 0.5], [0.3, 0.7]), data)
    assert np.allclose(tau, [0.3, 0.7], atol=1e-14)


def test_e_step_scalar_values():
    tau = e_step(_scalar_model([0.0, 2.0], [0.5, 0.5]), _scalar_data([1.0, 0.0]))
    assert np.allclose(tau[0], [0.5, 0.5], atol=1e-15)
    assert tau[1, 0] == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-14)
    assert tau[1, 0] == pytest.approx(0.8808, abs=5e-5)


def test_e_step_far_tail_no_underflow():
    tau = e_step(_scalar_model([0.0, 2.0], [0.5, 0.5]), _scalar_data([1e3]))
    assert np.all(np.isfinite(tau)) and tau[0, 1] == pytest.approx(1.0)


def test_coefficients_ols_oracle(rng):
    X = rng.normal(size=(40, 3))
    Y = rng.normal(size=(40, 2))
    B = m_step_coefficients(Dataset(Y, X), np.ones((40, 1)), 0)
    assert np.allclose(B, normal_equations_ols(X, Y), atol=1e-10)


def test_coefficients_intercept_only(rng):
    Y = rng.normal(size=(15, 3))
    B = m_step_coefficients(Dataset(Y, np.zeros((15, 0))), np.ones((15, 1)), 0)
    assert np.allclose(B[0], Y.mean(axis=0), atol=1e-12)


def test_noise_free_recovery_then_degenerate(rng):
    X = rng.normal(size=(30, 2))
    B = rng.normal(size=(3, 2))
    Y = np.hstack([np.ones((30, 1)), X]) @ B
    data = Dataset(Y, X)
    Bhat = m_step_coefficients(data, np.ones((30, 1)), 0)
    assert np.allclose(Bhat, B, atol=1e-10)
    with pytest.raises(DegeneracyError):
        estimate_sigma("VVV", ScatterInput(np.zeros((1, 3, 3)), [30.0]))
    res = fit(data, "eFMR", 1, "VVV", np.ones((30, 1)))
    assert res.failed and res.status == "degenerate"


def test_singular_gram_degenerate():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    data = Dataset(np.random.default_rng(0).normal(size=(10, 1)), X)
    with pytest.raises(DegeneracyError):
        m_step_coefficients(data, np.ones((10, 1)), 0)


def test_static_weights_examples():
    assert np.allclose(m_step_weights_static(np.tile([1.0, 0.0], (5, 1))), [1, 0])
    assert np.allclose(m_step_weights_static(np.tile([0.25, 0.75], (5, 1))), [0.25, 0.75])
    tau = np.array([[1, 0], [1, 0], [0, 1], [0.5, 0.5]], dtype=float)
    assert np.allclose(m_step_weights_static(tau), [0.625, 0.375])


def test_aitken_examples():
    assert aitken_stop(5, 5, 5, 1e-5) is True
    assert aitken_stop(0, 1, 1.5, 1e-5) is False
    assert aitken_stop(0, 1, 1.5, 0.6) is True
    assert aitken_stop(0, 1, 3, 1e-5) is False


def test_config_validation():
    with pytest.raises(ValueError):
        EmConfig(epsilon=0)
    with pytest.raises(ValueError):
        EmConfig(max_iter=0)
    with pytest.raises(ValueError):
        EmConfig(min_component_fraction=0.5).min_weight(100, 2)
    assert EmConfig().min_weight(200, 4) == pytest.approx(4.0)


def test_single_component_closed_form(rng):
    N, d = 50, 2
    X = rng.normal(size=(N, 2))
    Y = rng.normal(size=(N, d)) + X @ rng.normal(size=(2, d))
    data = Dataset(Y, X)
    B = normal_equations_ols(X, Y)
    R = Y - data.Xaug @ B
    S = R.T @ R / N
    ref = -0.5 * N * (d * math.log(2 * math.pi) + np.linalg.slogdet(S)[1] + d)
    res = fit(data, "eFMR", 1, "VVV", np.ones((N, 1)))
    assert res.converged and res.loglik == pytest.approx(ref, abs=1e-8)
    assert res.iterations <= 3
    # diagonal structures reach the diagonal closed form
    Sd = np.diag(np.diag(S))
    ref_d = -0.5 * N * (d * math.log(2 * math.pi) + np.log(np.diag(S)).sum() + d)
    res = fit(data, "eFMR", 1, "VVI", np.ones((N, 1)))
    assert res.loglik == pytest.approx(ref_d, abs=1e-8)
    assert np.allclose(res.model.Sigma[0], Sd)


def _two_lines(rng, n=60, sep=10.0):
    x = rng.uniform(-2, 2, size=2 * n)
    lab = np.repeat([0, 1], n)
    y = 1.0 + 2.0 * x + sep * lab + rng.normal(size=2 * n)
    return Dataset(y[:, None], x[:, None]), lab


def test_well_separated_regressions(rng):
    data, lab = _two_lines(rng)
    init = np.eye(2)[lab]
    for fam in ("eFMR", "eFMRC"):
        res = fit(data, fam, 2, "VII", init)
        assert res.converged
        assert np.all(np.diff(res.loglik_trace) >= -1e-8)
        assert np.array_equal(res.labels, lab)
        assert np.allclose(res.model.B[:, 1, 0], 2.0, atol=0.3)


def test_permutation_equivariance(rng):
    data, lab = _two_lines(rng, sep=4.0)
    init = random_init(data.N, 3, 7)
    perm = [2, 0, 1]
    for fam, code in (("eFMR", "VVV"), ("eFMRC", "VEI"), ("eFMR", "EVE")):
        a = fit(data, fam, 3, code, init)
        b = fit(data, fam, 3, code, init[:, perm])
        assert not a.failed
        assert b.loglik == pytest.approx(a.loglik, abs=1e-8)
        assert np.allclose(b.tau, a.tau[:, perm], atol=1e-7)
        assert np.allclose(b.model.B, a.model.B[perm], atol=1e-6)


def test_translation_invariance(crabs):
    init = kmeans_init(crabs, 2, seed=0)
    c = np.array([5.0, -3.0, 100.0])
    shifted = Dataset(crabs.Y + c, crabs.X)
    for fam in ("eFMR", "eFMRC"):
        a = fit(crabs, fam, 2, "VVV", init)
        b = fit(shifted, fam, 2, "VVV", init)
        assert b.loglik == pytest.approx(a.loglik, abs=1e-8)
        assert np.allclose(b.model.B[:, 0] - a.model.B[:, 0], c, atol=1e-6)
        assert np.allclose(b.model.B[:, 1:], a.model.B[:, 1:], atol=1e-8)
        assert np.allclose(b.model.Sigma, a.model.Sigma, atol=1e-8)
        assert np.allclose(b.tau, a.tau, atol=1e-8)
        assert np.array_equal(b.labels, a.labels)


def _independent_em(data, init, iters):
    """Mixture of per-response univariate regressions sharing the labels."""
    Y, X = data.Y, data.Xaug
    tau = init.copy()
    N, G = tau.shape
    for _ in range(iters):
        pi = tau.mean(axis=0)
        logp = np.zeros((N, G))
        for g in range(G):
            w = tau[:, g]
            for j in range(Y.shape[1]):
                beta = np.linalg.solve(X.T @ (X * w[:, None]), X.T @ (w * Y[:, j]))
                r = Y[:, j] - X @ beta
                s2 = np.sum(w * r * r) / w.sum()
                logp[:, g] += -0.5 * (math.log(2 * math.pi * s2) + r * r / s2)
            logp[:, g] += math.log(pi[g])
        m = logp.max(axis=1, keepdims=True)
        tau = np.exp(logp - m)
        tau /= tau.sum(axis=1, keepdims=True)
    return tau


def test_vvi_matches_independent_regressions(crabs):
    init = kmeans_init(crabs, 2, seed=0)
    res = fit(crabs, "eFMR", 2, "VVI", init)
    ref = _independent_em(crabs, init, res.iterations)
    assert np.array_equal(res.labels, ref.argmax(axis=1))
    assert np.allclose(res.tau, ref, atol=1e-8)


def test_round_trip_loglik(crabs):
    res = fit(crabs, "eFMRC", 3, "VEE", kmeans_init(crabs, 3, seed=1))
    assert log_likelihood(res.model, crabs) == pytest.approx(res.loglik, abs=1e-8)
    assert np.allclose(e_step(res.model, crabs), res.tau, atol=1e-8)


def test_fit_result_invariants(crabs):
    res = fit(crabs, "eFMRC", 3, "EVV", kmeans_init(crabs, 3, seed=2))
    assert np.allclose(res.tau.sum(axis=1), 1, atol=1e-10)
    assert np.all((res.tau >= 0) & (res.tau <= 1))
    assert np.array_equal(res.labels, res.tau.argmax(axis=1))
    assert np.all(res.model.weights.alpha[0] == 0)
    for S in res.model.Sigma:
        assert np.allclose(S, S.T, atol=1e-10) and np.all(np.linalg.eigvalsh(S) > 0)


def test_small_component_guard(rng):
    data, lab = _two_lines(rng, n=50)
    init = np.zeros((100, 3))
    init[np.arange(100), lab] = 1
    init[0] = [0, 0, 1]
    res = fit(data, "eFMR", 3, "VII", init)
    assert res.failed and res.status == "degenerate" and res.bic == -np.inf


def random_instance(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(60, 201))
    d = int(rng.integers(1, 4))
    p = int(rng.integers(0, 3))
    G = int(rng.integers(1, 4))
    X = rng.normal(size=(N, p))
    lab = rng.integers(0, G, size=N)
    B = rng.normal(scale=3.0, size=(G, p + 1, d))
    Xa = np.hstack([np.ones((N, 1)), X])
    Y = np.einsum("ij,ijk->ik", Xa, B[lab]) + rng.normal(size=(N, d)) * rng.uniform(0.5, 2, size=d)
    return Dataset(Y, X), G, rng


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(0, 13))
def test_monotone_traces(seed, k):
    data, G, rng = random_instance(seed)
    code = STRUCTURES[k]
    init = random_init(data.N, G, seed)
    for fam, tol in (("eFMR", 1e-8), ("eFMRC", 1e-6)):
        res = fit(data, fam, G, code, init)
        assert res.status != "numeric", res.message
        assert np.all(np.diff(res.loglik_trace) >= -tol)
