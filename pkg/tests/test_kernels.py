import os
import subprocess
import sys

import numpy as np
import pytest

from pfmr import kernels

NAMES = ["log_densities", "normalize_log", "weighted_scatter", "weighted_normal_equations",
         "nearest_center", "logit_soft_objective", "logit_soft_stats"]


def _args(rng, N=57, d=3, p=2, G=3):
    Y = rng.normal(size=(N, d))
    Xaug = np.hstack([np.ones((N, 1)), rng.normal(size=(N, p))])
    B = rng.normal(size=(G, p + 1, d))
    A = rng.normal(size=(G, d, d))
    chol = np.linalg.cholesky(A @ A.transpose(0, 2, 1) + np.eye(d))
    tau = rng.dirichlet(np.ones(G), size=N)
    alpha = rng.normal(size=(G, p + 1))
    alpha[0] = 0
    Z = rng.normal(size=(N, 4))
    logp = rng.normal(size=(N, G)) * 50
    return {
        "log_densities": (Y, Xaug, B, chol),
        "normalize_log": (logp,),
        "weighted_scatter": (Y, Xaug, B, tau),
        "weighted_normal_equations": (Y, Xaug, tau),
        "nearest_center": (Z, Z[:G].copy()),
        "logit_soft_objective": (Xaug, tau, alpha),
        "logit_soft_stats": (Xaug, tau, alpha),
    }


@pytest.mark.parametrize("name", NAMES)
def test_backends_agree(name, rng):
    args = _args(rng)[name]
    a = getattr(kernels, name + "_np")(*args)
    b = getattr(kernels, name + "_nb")(*args)
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-10)


def test_log_density_reference(rng):
    from scipy.stats import multivariate_normal

    Y, Xaug, B, chol = _args(rng)["log_densities"]
    out = kernels.log_densities(Y, Xaug, B, chol)
    for g in range(B.shape[0]):
        S = chol[g] @ chol[g].T
        ref = [multivariate_normal(Xaug[i] @ B[g], S).logpdf(Y[i]) for i in range(len(Y))]
        assert np.allclose(out[:, g], ref, atol=1e-10)


def test_soft_stats_gradient(rng):
    V, tau, alpha = _args(rng)["logit_soft_stats"]
    obj, grad, negH = kernels.logit_soft_stats(V, tau, alpha)
    h = 1e-6
    flat = alpha[1:].ravel()
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = h
        up = alpha.copy(); up[1:] = (flat + e).reshape(alpha[1:].shape)
        dn = alpha.copy(); dn[1:] = (flat - e).reshape(alpha[1:].shape)
        num = (kernels.logit_soft_objective(V, tau, up) - kernels.logit_soft_objective(V, tau, dn)) / (2 * h)
        assert num == pytest.approx(grad[k], abs=1e-5)
    assert np.allclose(negH, negH.T) and np.all(np.linalg.eigvalsh(negH) > -1e-10)


def test_env_flag_selects_numpy():
    code = "from pfmr import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, PFMR_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
