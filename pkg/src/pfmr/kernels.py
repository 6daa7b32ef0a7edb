"""Hot inner loops of the EM iteration.

Each kernel has a numba version (``*_nb``) and a numpy version (``*_np``)
with identical semantics. The public names dispatch on
:data:`pfmr._accel.USE_NUMBA`.
"""

import numpy as np
from scipy.linalg import solve_triangular

from ._accel import USE_NUMBA, njit

LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# log-densities  log phi_d(y_i | B_g' x_i, Sigma_g)


def log_densities_np(Y, Xaug, B, chol):
    """N x G matrix of Gaussian regression log-densities.

    ``B`` is G x (p+1) x d and ``chol`` holds lower Cholesky factors of the
    G covariances.
    """
    N, d = Y.shape
    G = B.shape[0]
    out = np.empty((N, G))
    for g in range(G):
        R = Y - Xaug @ B[g]
        Z = solve_triangular(chol[g], R.T, lower=True, check_finite=False)
        logdet = 2.0 * np.sum(np.log(np.diag(chol[g])))
        out[:, g] = -0.5 * (d * LOG_2PI + logdet + np.sum(Z * Z, axis=0))
    return out


@njit
def log_densities_nb(Y, Xaug, B, chol):
    N, d = Y.shape
    G = B.shape[0]
    k = Xaug.shape[1]
    out = np.empty((N, G))
    r = np.empty(d)
    log2pi = np.log(2.0 * np.pi)
    for g in range(G):
        logdet = 0.0
        for j in range(d):
            logdet += 2.0 * np.log(chol[g, j, j])
        const = d * log2pi + logdet
        for i in range(N):
            for j in range(d):
                m = 0.0
                for c in range(k):
                    m += Xaug[i, c] * B[g, c, j]
                r[j] = Y[i, j] - m
            q = 0.0
            # forward substitution L z = r, z overwrites r
            for j in range(d):
                s = r[j]
                for c in range(j):
                    s -= chol[g, j, c] * r[c]
                r[j] = s / chol[g, j, j]
                q += r[j] * r[j]
            out[i, g] = -0.5 * (const + q)
    return out


# ---------------------------------------------------------------------------
# responsibilities from log joint densities


def normalize_log_np(logp):
    """Row-normalise log joint densities; returns (tau, per-row log sums)."""
    m = np.max(logp, axis=1, keepdims=True)
    e = np.exp(logp - m)
    s = np.sum(e, axis=1, keepdims=True)
    return e / s, (m + np.log(s))[:, 0]


@njit
def normalize_log_nb(logp):
    N, G = logp.shape
    tau = np.empty((N, G))
    rows = np.empty(N)
    for i in range(N):
        m = logp[i, 0]
        for g in range(1, G):
            if logp[i, g] > m:
                m = logp[i, g]
        s = 0.0
        for g in range(G):
            e = np.exp(logp[i, g] - m)
            tau[i, g] = e
            s += e
        for g in range(G):
            tau[i, g] /= s
        rows[i] = m + np.log(s)
    return tau, rows


# ---------------------------------------------------------------------------
# weighted residual scatter  W_g = sum_i tau_ig r_ig r_ig'


def weighted_scatter_np(Y, Xaug, B, tau):
    G = B.shape[0]
    d = Y.shape[1]
    W = np.empty((G, d, d))
    for g in range(G):
        R = Y - Xaug @ B[g]
        W[g] = (R * tau[:, g:g + 1]).T @ R
        W[g] = 0.5 * (W[g] + W[g].T)
    return W


@njit
def weighted_scatter_nb(Y, Xaug, B, tau):
    N, d = Y.shape
    G = B.shape[0]
    k = Xaug.shape[1]
    W = np.zeros((G, d, d))
    r = np.empty(d)
    for g in range(G):
        for i in range(N):
            t = tau[i, g]
            for j in range(d):
                m = 0.0
                for c in range(k):
                    m += Xaug[i, c] * B[g, c, j]
                r[j] = Y[i, j] - m
            for a in range(d):
                ta = t * r[a]
                for b in range(a + 1):
                    W[g, a, b] += ta * r[b]
        for a in range(d):
            for b in range(a):
                W[g, b, a] = W[g, a, b]
    return W


# ---------------------------------------------------------------------------
# weighted Gram and cross-product for the coefficient update


def weighted_normal_equations_np(Y, Xaug, tau):
    """Per-component ``X' T_g X`` (G x k x k) and ``X' T_g Y`` (G x k x d)."""
    G = tau.shape[1]
    k = Xaug.shape[1]
    d = Y.shape[1]
    gram = np.empty((G, k, k))
    cross = np.empty((G, k, d))
    for g in range(G):
        Xw = Xaug * tau[:, g:g + 1]
        gram[g] = Xw.T @ Xaug
        cross[g] = Xw.T @ Y
    return gram, cross


@njit
def weighted_normal_equations_nb(Y, Xaug, tau):
    N, d = Y.shape
    k = Xaug.shape[1]
    G = tau.shape[1]
    gram = np.zeros((G, k, k))
    cross = np.zeros((G, k, d))
    for g in range(G):
        for i in range(N):
            t = tau[i, g]
            for a in range(k):
                ta = t * Xaug[i, a]
                for b in range(a + 1):
                    gram[g, a, b] += ta * Xaug[i, b]
                for j in range(d):
                    cross[g, a, j] += ta * Y[i, j]
        for a in range(k):
            for b in range(a):
                gram[g, b, a] = gram[g, a, b]
    return gram, cross


# ---------------------------------------------------------------------------
# k-means assignment step


def nearest_center_np(Z, centers):
    """Index of, and squared distance to, the nearest center for each row."""
    d2 = ((Z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    idx = np.argmin(d2, axis=1)
    return idx, d2[np.arange(Z.shape[0]), idx]


@njit
def nearest_center_nb(Z, centers):
    N, m = Z.shape
    K = centers.shape[0]
    idx = np.empty(N, dtype=np.int64)
    best = np.empty(N)
    for i in range(N):
        bi = 0
        bd = np.inf
        for c in range(K):
            s = 0.0
            for j in range(m):
                t = Z[i, j] - centers[c, j]
                s += t * t
            if s < bd:
                bd = s
                bi = c
        idx[i] = bi
        best[i] = bd
    return idx, best


# ---------------------------------------------------------------------------
# soft-target multinomial logit: objective, gradient, negative Hessian


def logit_soft_objective_np(V, tau, alpha):
    eta = V @ alpha.T
    m = eta.max(axis=1, keepdims=True)
    logp = eta - m - np.log(np.exp(eta - m).sum(axis=1, keepdims=True))
    return float(np.sum(tau * logp))


def logit_soft_stats_np(V, tau, alpha):
    """Objective, gradient (w.r.t. alpha[1:]) and negative Hessian."""
    N, k = V.shape
    G = tau.shape[1]
    eta = V @ alpha.T
    m = eta.max(axis=1, keepdims=True)
    e = np.exp(eta - m)
    s = e.sum(axis=1, keepdims=True)
    P = e / s
    obj = float(np.sum(tau * (eta - m - np.log(s))))
    w = tau.sum(axis=1)
    grad = ((tau - P * w[:, None])[:, 1:].T @ V).ravel()
    Pw = P * w[:, None]
    H = np.zeros(((G - 1) * k, (G - 1) * k))
    for a in range(1, G):
        Va = V * Pw[:, a:a + 1]
        for b in range(a, G):
            # w_i (delta_ab p_a - p_a p_b) v v'
            block = -(Va * P[:, b:b + 1]).T @ V
            if a == b:
                block += Va.T @ V
            ra = slice((a - 1) * k, a * k)
            rb = slice((b - 1) * k, b * k)
            H[ra, rb] = block
            H[rb, ra] = block.T
    return obj, grad, H


@njit
def logit_soft_objective_nb(V, tau, alpha):
    N, k = V.shape
    G = tau.shape[1]
    eta = np.empty(G)
    total = 0.0
    for i in range(N):
        m = -np.inf
        for g in range(G):
            t = 0.0
            for c in range(k):
                t += V[i, c] * alpha[g, c]
            eta[g] = t
            if t > m:
                m = t
        s = 0.0
        for g in range(G):
            s += np.exp(eta[g] - m)
        ls = m + np.log(s)
        for g in range(G):
            total += tau[i, g] * (eta[g] - ls)
    return total


@njit
def logit_soft_stats_nb(V, tau, alpha):
    N, k = V.shape
    G = tau.shape[1]
    m1 = G - 1
    eta = np.empty(G)
    p = np.empty(G)
    grad = np.zeros(m1 * k)
    H = np.zeros((m1 * k, m1 * k))
    obj = 0.0
    for i in range(N):
        m = -np.inf
        for g in range(G):
            t = 0.0
            for c in range(k):
                t += V[i, c] * alpha[g, c]
            eta[g] = t
            if t > m:
                m = t
        s = 0.0
        for g in range(G):
            p[g] = np.exp(eta[g] - m)
            s += p[g]
        ls = m + np.log(s)
        w = 0.0
        for g in range(G):
            p[g] /= s
            obj += tau[i, g] * (eta[g] - ls)
            w += tau[i, g]
        for a in range(m1):
            r = tau[i, a + 1] - p[a + 1] * w
            for c in range(k):
                grad[a * k + c] += r * V[i, c]
            for b in range(a, m1):
                coef = -p[a + 1] * p[b + 1] * w
                if a == b:
                    coef += p[a + 1] * w
                for c in range(k):
                    vc = coef * V[i, c]
                    for e in range(k):
                        H[a * k + c, b * k + e] += vc * V[i, e]
    for a in range(m1):
        for b in range(a + 1, m1):
            for c in range(k):
                for e in range(k):
                    H[b * k + e, a * k + c] = H[a * k + c, b * k + e]
    return obj, grad, H


if USE_NUMBA:
    log_densities = log_densities_nb
    normalize_log = normalize_log_nb
    weighted_scatter = weighted_scatter_nb
    weighted_normal_equations = weighted_normal_equations_nb
    nearest_center = nearest_center_nb
    logit_soft_objective = logit_soft_objective_nb
    logit_soft_stats = logit_soft_stats_nb
else:
    log_densities = log_densities_np
    normalize_log = normalize_log_np
    weighted_scatter = weighted_scatter_np
    weighted_normal_equations = weighted_normal_equations_np
    nearest_center = nearest_center_np
    logit_soft_objective = logit_soft_objective_np
    logit_soft_stats = logit_soft_stats_np

BACKEND = "numba" if USE_NUMBA else "numpy"
