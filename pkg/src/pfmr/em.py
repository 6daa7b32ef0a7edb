"""EM estimation of a single (family, G, structure) configuration."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .concomitant import fit_soft, log_weight_matrix
from .core import (
    ComponentParams,
    ConcomitantWeights,
    CovarianceStructure,
    Dataset,
    DegeneracyError,
    Family,
    FitResult,
    MixtureModel,
    NumericError,
    StaticWeights,
    bic,
    n_free_params,
)
from .covariance import ScatterInput, estimate_sigma

log = logging.getLogger(__name__)

GRAM_COND_MAX = 1e12
SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class EmConfig:
    """Stopping and guard settings for one EM run.

    ``min_component_weight`` is an absolute floor on ``sum_i tau_ig``; when
    left as None it is ``min_component_fraction * N``.
    """

    epsilon: float = 1e-5
    max_iter: int = 1000
    min_component_fraction: float = 0.02
    min_component_weight: Optional[float] = None
    cov_tol: float = 1e-8
    cov_max_iter: int = 200
    concomitant_ridge: float = 0.0
    concomitant_tol: float = 1e-9
    monotone_tol: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.min_component_fraction < 0:
            raise ValueError("min_component_fraction must be non-negative")

    def min_weight(self, N: int, G: int) -> float:
        w = self.min_component_weight
        if w is None:
            w = self.min_component_fraction * N
        if G > 1 and w >= N / G:
            raise ValueError(f"minimum component weight {w} must be below N/G = {N / G}")
        return w


def aitken_stop(l_prev2: float, l_prev: float, l_curr: float, epsilon: float) -> bool:
    """Aitken-acceleration stopping rule.

    The asymptotic log-likelihood ``l_A = l_prev + (l_curr - l_prev)/(1 - a)``
    with ``a = (l_curr - l_prev)/(l_prev - l_prev2)`` is compared with the
    current value ``l_curr``.
    """
    step = l_curr - l_prev
    if step == 0:
        return True
    denom = l_prev - l_prev2
    if denom == 0:
        return False
    a = step / denom
    if a >= 1:
        return False
    l_inf = l_prev + step / (1.0 - a)
    return bool(l_inf - l_curr < epsilon)


def _cholesky_all(Sigma):
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise DegeneracyError("covariance not positive definite") from None


def _log_weights(model: MixtureModel, data: Dataset) -> np.ndarray:
    w = model.weights
    if isinstance(w, ConcomitantWeights):
        return log_weight_matrix(w.alpha, data.Vaug)
    with np.errstate(divide="ignore"):
        return np.broadcast_to(np.log(w.pi), (data.N, model.G))


def _joint_log(model: MixtureModel, data: Dataset) -> np.ndarray:
    B = np.ascontiguousarray(model.B)
    chol = np.ascontiguousarray(_cholesky_all(model.Sigma))
    return kernels.log_densities(data.Y, data.Xaug, B, chol) + _log_weights(model, data)


def _responsibilities(logp):
    if not np.all(np.isfinite(np.max(logp, axis=1))):
        raise NumericError("all component densities underflowed for some observation")
    tau, rows = kernels.normalize_log(np.ascontiguousarray(logp))
    return tau, rows


def e_step(model: MixtureModel, data: Dataset) -> np.ndarray:
    """N x G posterior membership probabilities."""
    tau, _ = _responsibilities(_joint_log(model, data))
    return tau


def log_likelihood(model: MixtureModel, data: Dataset) -> float:
    """Observed-data log-likelihood of ``model`` on ``data``."""
    _, rows = _responsibilities(_joint_log(model, data))
    return float(np.sum(rows))


def _solve_coefficients(gram, cross):
    if np.linalg.cond(gram) > GRAM_COND_MAX:
        raise DegeneracyError("weighted Gram matrix is singular")
    return np.linalg.solve(gram, cross)


def m_step_coefficients(data: Dataset, tau: np.ndarray, g: int) -> np.ndarray:
    """Weighted least-squares coefficients ((p+1) x d) for component ``g``."""
    t = np.asarray(tau, dtype=float)[:, g]
    Xw = data.Xaug * t[:, None]
    return _solve_coefficients(Xw.T @ data.Xaug, Xw.T @ data.Y)


def m_step_coefficients_all(data: Dataset, tau: np.ndarray) -> np.ndarray:
    gram, cross = kernels.weighted_normal_equations(data.Y, data.Xaug, np.ascontiguousarray(tau))
    return np.stack([_solve_coefficients(gram[g], cross[g]) for g in range(tau.shape[1])])


def m_step_weights_static(tau: np.ndarray) -> np.ndarray:
    return np.asarray(tau, dtype=float).mean(axis=0)


def _failure(family, structure, G, n_params, trace, it, status, message):
    return FitResult(
        family=family,
        structure=structure,
        G=G,
        model=None,
        loglik=-np.inf,
        loglik_trace=np.asarray(trace, dtype=float),
        tau=None,
        labels=None,
        bic=-np.inf,
        n_params=n_params,
        converged=False,
        iterations=it,
        status=status,
        message=message,
    )


def fit(
    data: Dataset,
    family,
    G: int,
    structure,
    init: np.ndarray,
    config: Optional[EmConfig] = None,
) -> FitResult:
    """Run EM from initial responsibilities ``init``.

    The first step is an M-step from ``init``. Degenerate runs (undersized
    component, singular Gram or covariance, density underflow) return a
    failed :class:`FitResult` with ``bic = -inf`` instead of raising.
    """
    config = config or EmConfig()
    family = Family.parse(family)
    structure = CovarianceStructure.parse(structure)
    N = data.N
    init = np.asarray(init, dtype=float)
    if init.shape != (N, G):
        raise ValueError(f"init must be ({N}, {G}), got {init.shape}")
    if not np.allclose(init.sum(axis=1), 1.0, atol=1e-8):
        raise ValueError("init rows must sum to one")
    q = data.q if family is Family.EFMRC else 0
    m = n_free_params(family, structure, G, data.d, data.p, q)
    min_w = config.min_weight(N, G)

    # covariances this small next to the response spread are roundoff
    sigma_floor = SIGMA_FLOOR * max(float(np.max(np.var(data.Y, axis=0))), np.finfo(float).tiny)
    tau = init
    Sigma = None
    alpha = None
    trace = []
    converged = False
    status = "max_iter"
    it = 0
    try:
        for it in range(1, config.max_iter + 1):
            n = tau.sum(axis=0)
            if np.any(n < min_w) or np.any(n <= 0):
                raise DegeneracyError(
                    f"component weight {n.min():.3g} below minimum {min_w:.3g}")
            B = m_step_coefficients_all(data, tau)
            W = kernels.weighted_scatter(data.Y, data.Xaug, B, np.ascontiguousarray(tau))
            Sigma = estimate_sigma(structure, ScatterInput(W, n), start=Sigma,
                                   tol=config.cov_tol, max_iter=config.cov_max_iter)
            if np.linalg.eigvalsh(Sigma)[:, 0].min() < sigma_floor:
                raise DegeneracyError("covariance collapsed relative to the response scale")
            if family is Family.EFMR:
                weights = StaticWeights(m_step_weights_static(tau))
            else:
                conc = fit_soft(data.Vaug, tau, warm_start=alpha, check_rank=alpha is None,
                                tol=config.concomitant_tol, ridge=config.concomitant_ridge)
                alpha = conc.alpha
                weights = ConcomitantWeights(alpha)
            model = MixtureModel(
                structure,
                tuple(ComponentParams(B[g], Sigma[g]) for g in range(G)),
                weights,
            )
            tau, rows = _responsibilities(_joint_log(model, data))
            ll = float(np.sum(rows))
            if not np.isfinite(ll):
                raise NumericError("non-finite log-likelihood")
            if trace and ll < trace[-1] - config.monotone_tol:
                if family is Family.EFMRC:
                    trace.append(ll)
                    raise NumericError(
                        f"log-likelihood decreased by {trace[-2] - ll:.3g} at iteration {it}")
                log.debug("log-likelihood decreased by %.3g at iteration %d", trace[-1] - ll, it)
            trace.append(ll)
            if len(trace) >= 3 and aitken_stop(trace[-3], trace[-2], trace[-1], config.epsilon):
                converged = True
                status = "converged"
                break
            if G == 1 and len(trace) >= 2 and trace[-1] == trace[-2]:
                converged = True
                status = "converged"
                break
    except DegeneracyError as exc:
        return _failure(family, structure, G, m, trace, it, "degenerate", str(exc))
    except NumericError as exc:
        return _failure(family, structure, G, m, trace, it, "numeric", str(exc))

    ll = trace[-1]
    return FitResult(
        family=family,
        structure=structure,
        G=G,
        model=model,
        loglik=ll,
        loglik_trace=np.asarray(trace),
        tau=tau,
        labels=np.argmax(tau, axis=1),
        bic=bic(ll, m, N),
        n_params=m,
        converged=converged,
        iterations=it,
        status=status,
    )
