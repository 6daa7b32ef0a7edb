"""Multinomial-logit mixing weights driven by concomitant variables.

Weights are ``pi_ig = exp(alpha_g' v_i) / sum_h exp(alpha_h' v_i)`` with the
first component as baseline (``alpha_1 = 0``). Coefficients are fitted to
soft targets (EM responsibilities) by damped Newton iterations with step
halving, which never lower the soft multinomial log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_softmax, softmax

from . import kernels
from .core import DegeneracyError

SEPARATION_NORM = 1e3


@dataclass(frozen=True)
class ConcomitantModel:
    alpha: np.ndarray
    objective: float = np.nan
    grad_norm: float = np.nan
    iterations: int = 0
    converged: bool = True
    separated: bool = False

    @property
    def G(self) -> int:
        return self.alpha.shape[0]

    @property
    def q(self) -> int:
        return self.alpha.shape[1] - 1


def weights(alpha, v) -> np.ndarray:
    """Mixing weights for one concomitant vector ``v`` (intercept included)."""
    return softmax(np.asarray(alpha, float) @ np.asarray(v, float))


def weight_matrix(alpha, V) -> np.ndarray:
    """N x G mixing weights for the rows of the augmented design ``V``."""
    return softmax(np.asarray(V, float) @ np.asarray(alpha, float).T, axis=1)


def log_weight_matrix(alpha, V) -> np.ndarray:
    return log_softmax(np.asarray(V, float) @ np.asarray(alpha, float).T, axis=1)


def soft_loglik(alpha, V, tau, ridge: float = 0.0) -> float:
    """``sum_ig tau_ig log pi_ig`` minus an optional ridge penalty."""
    val = kernels.logit_soft_objective(
        np.ascontiguousarray(V, dtype=float),
        np.ascontiguousarray(tau, dtype=float),
        np.ascontiguousarray(alpha, dtype=float),
    )
    if ridge:
        val -= 0.5 * ridge * float(np.sum(alpha[1:] ** 2))
    return float(val)


def _stats(alpha, V, tau, ridge):
    obj, grad, H = kernels.logit_soft_stats(V, tau, np.ascontiguousarray(alpha))
    if ridge:
        obj -= 0.5 * ridge * float(np.sum(alpha[1:] ** 2))
        grad = grad - ridge * alpha[1:].ravel()
        H = H + ridge * np.eye(H.shape[0])
    return float(obj), grad, H


def _ball_limit(a, s, radius):
    """Largest t with ||a + t s|| <= radius (assumes ||a|| <= radius)."""
    ss = float(s @ s)
    if ss == 0.0:
        return np.inf
    as_ = float(a @ s)
    disc = as_ * as_ - ss * (float(a @ a) - radius * radius)
    return (-as_ + np.sqrt(max(disc, 0.0))) / ss


def fit_soft(
    V,
    tau,
    warm_start: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    max_iter: int = 100,
    ridge: float = 0.0,
    max_norm: float = SEPARATION_NORM,
    check_rank: bool = True,
) -> ConcomitantModel:
    """Maximise the soft-target multinomial log-likelihood over ``alpha``.

    Parameters
    ----------
    V : (N, q+1) array
        Concomitant design with a leading column of ones.
    tau : (N, G) array
        Target probabilities (rows sum to one).
    warm_start : (G, q+1) array, optional
        Starting coefficients; row 0 is ignored and reset to zero.
    max_norm : float
        Separation guard. A Newton step that would leave the ball of this
        radius is cut back to its boundary, the iteration stops there and
        the result is flagged ``separated``.

    Raises
    ------
    DegeneracyError
        If the design matrix is rank deficient.
    """
    V = np.ascontiguousarray(V, dtype=float)
    tau = np.ascontiguousarray(tau, dtype=float)
    N, k = V.shape
    G = tau.shape[1]
    if G == 1:
        return ConcomitantModel(np.zeros((1, k)), 0.0, 0.0, 0, True, False)
    if check_rank and np.linalg.matrix_rank(V) < k:
        raise DegeneracyError("concomitant design is rank deficient")
    alpha = np.zeros((G, k)) if warm_start is None else np.array(warm_start, dtype=float)
    alpha[0] = 0.0
    if np.linalg.norm(alpha) > max_norm:
        alpha *= max_norm / np.linalg.norm(alpha)
    separated = False
    converged = False
    it = 0
    obj, grad, H = _stats(alpha, V, tau, ridge)
    gnorm = float(np.max(np.abs(grad)))
    for it in range(1, max_iter + 1):
        if gnorm < 1e-10:
            converged = True
            break
        jitter = 1e-12 * max(np.trace(H) / H.shape[0], 1e-300)
        try:
            step = np.linalg.solve(H + jitter * np.eye(H.shape[0]), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # Newton decrement: predicted gain of the full step
        if 0.5 * float(grad @ step) <= 1e-13 * max(1.0, abs(obj)):
            converged = True
            break
        t = 1.0
        limit = _ball_limit(alpha[1:].ravel(), step, max_norm)
        hit_ball = limit < 1.0
        if hit_ball:
            t = limit
        improved = False
        for _ in range(40):
            cand = alpha.copy()
            cand[1:] += t * step.reshape(G - 1, k)
            val = soft_loglik(cand, V, tau, ridge)
            if val >= obj:
                improved = True
                break
            t *= 0.5
            hit_ball = False
        if not improved:
            converged = gnorm < 1e-6
            break
        change = val - obj
        alpha = cand
        obj, grad, H = _stats(alpha, V, tau, ridge)
        gnorm = float(np.max(np.abs(grad)))
        if hit_ball:
            separated = True
            break
        if change <= tol * max(1.0, abs(obj)) and gnorm < 1e-6:
            converged = True
            break
    else:
        converged = gnorm < 1e-6
    return ConcomitantModel(alpha, obj, gnorm, it, converged, separated)
