"""Constrained maximum-likelihood covariance updates.

Given per-component weighted residual scatter matrices ``W_g`` and weights
``n_g``, each estimator maximises

    sum_g [ -n_g log|Sigma_g| - tr(Sigma_g^{-1} W_g) ]

over covariance sets of the form ``Sigma_g = lambda_g D_g A_g D_g'`` obeying
the equal/variable/identity constraints named by the structure code.

Closed forms are used for EII, VII, EEI, EVI, VVI, EEE, EEV, EVV and VVV.
VEI, VEE and VEV alternate between volume and shape updates. EVE and VVE
alternate shape/volume updates with sweeps of exact pairwise (Jacobi)
rotations of the common orientation matrix. Every iterative scheme is a
block-coordinate ascent, so starting it from the previous EM iterate can
never lower the objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CovarianceStructure, DegeneracyError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
SINGULAR_RATIO = 1e-12


@dataclass(frozen=True)
class ScatterInput:
    """Weighted scatter statistics of the G components.

    W : (G, d, d) array
    n : (G,) array of component weights
    """

    W: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 2:
            W = W[None]
        n = np.atleast_1d(np.asarray(self.n, dtype=float))
        if W.ndim != 3 or W.shape[1] != W.shape[2]:
            raise ValueError("W must be (G, d, d)")
        if n.shape != (W.shape[0],):
            raise ValueError("n must have one entry per component")
        if np.any(n <= 0):
            raise DegeneracyError("component weight is not positive")
        object.__setattr__(self, "W", 0.5 * (W + np.swapaxes(W, 1, 2)))
        object.__setattr__(self, "n", n)

    @property
    def G(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def N(self) -> float:
        return float(self.n.sum())


def objective(sigmas, scatter: ScatterInput) -> float:
    """Covariance part of the expected complete-data log-likelihood (x2)."""
    total = 0.0
    for S, W, n in zip(sigmas, scatter.W, scatter.n):
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            return -np.inf
        total += -n * logdet - np.trace(np.linalg.solve(S, W))
    return float(total)


def _geo(v):
    """Geometric mean of a positive vector (the d-th root of a determinant)."""
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DegeneracyError("non-positive eigenvalue in scatter")
    return float(np.exp(np.mean(np.log(v))))


def _eigh_desc(S):
    vals, vecs = np.linalg.eigh(S)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def _check_spd(sigmas):
    for S in sigmas:
        if not np.all(np.isfinite(S)):
            raise DegeneracyError("non-finite covariance estimate")
        vals = np.linalg.eigvalsh(S)
        if vals[-1] <= 0 or vals[0] < SINGULAR_RATIO * vals[-1]:
            raise DegeneracyError("covariance estimate is numerically singular")


def _volumes_from(start, G):
    """Per-component volumes |Sigma_g|^{1/d} of a previous estimate."""
    lam = np.empty(G)
    for g in range(G):
        lam[g] = _geo(np.linalg.eigvalsh(start[g]))
    return lam


def _converged(old, new, tol):
    return abs(new - old) <= tol * max(1.0, abs(new))


# ---------------------------------------------------------------------------
# diagonal families


def _eii(sc):
    d = sc.d
    lam = np.trace(sc.W.sum(axis=0)) / (sc.N * d)
    return np.stack([lam * np.eye(d)] * sc.G)


def _vii(sc):
    d = sc.d
    lam = np.trace(sc.W, axis1=1, axis2=2) / (sc.n * d)
    return lam[:, None, None] * np.eye(d)[None]


def _eei(sc):
    diag = np.diagonal(sc.W.sum(axis=0)) / sc.N
    return np.stack([np.diag(diag)] * sc.G)


def _vvi(sc):
    diag = np.diagonal(sc.W, axis1=1, axis2=2) / sc.n[:, None]
    return np.stack([np.diag(v) for v in diag])


def _evi(sc):
    omega = np.diagonal(sc.W, axis1=1, axis2=2)
    geos = np.array([_geo(w) for w in omega])
    lam = geos.sum() / sc.N
    return np.stack([np.diag(lam * w / gm) for w, gm in zip(omega, geos)])


def _vei(sc, start, tol, max_iter):
    d = sc.d
    omega = np.diagonal(sc.W, axis1=1, axis2=2)
    if start is not None:
        lam = _volumes_from(start, sc.G)
    else:
        lam = omega.sum(axis=1) / (sc.n * d)
    prev = -np.inf
    for _ in range(max_iter):
        s = (omega / lam[:, None]).sum(axis=0)
        A = s / _geo(s)
        lam = (omega / A[None]).sum(axis=1) / (sc.n * d)
        if np.any(lam <= 0):
            raise DegeneracyError("zero volume")
        sigmas = lam[:, None, None] * np.diag(A)[None]
        cur = objective(sigmas, sc)
        if _converged(prev, cur, tol):
            break
        prev = cur
    return sigmas


# ---------------------------------------------------------------------------
# common orientation with equal shape


def _eee(sc):
    return np.stack([sc.W.sum(axis=0) / sc.N] * sc.G)


def _vee(sc, start, tol, max_iter):
    d = sc.d
    if start is not None:
        lam = _volumes_from(start, sc.G)
    else:
        lam = np.trace(sc.W, axis1=1, axis2=2) / (sc.n * d)
    prev = -np.inf
    for _ in range(max_iter):
        S = (sc.W / lam[:, None, None]).sum(axis=0)
        vals, vecs = _eigh_desc(S)
        gm = _geo(vals)
        C = S / gm
        Cinv = (vecs / (vals / gm)) @ vecs.T
        lam = np.einsum("gij,ji->g", sc.W, Cinv) / (sc.n * d)
        if np.any(lam <= 0):
            raise DegeneracyError("zero volume")
        sigmas = lam[:, None, None] * C[None]
        cur = objective(sigmas, sc)
        if _converged(prev, cur, tol):
            break
        prev = cur
    return sigmas


# ---------------------------------------------------------------------------
# common orientation with variable shape: EVE, VVE


def _shape_volume_given_D(sc, D, equal_volume):
    """Optimal shapes and volumes for a fixed common orientation ``D``."""
    diag = np.einsum("ji,gjk,ki->gi", D, sc.W, D)
    geos = np.array([_geo(v) for v in diag])
    A = diag / geos[:, None]
    if equal_volume:
        lam = np.full(sc.G, geos.sum() / sc.N)
    else:
        lam = geos / sc.n
    return lam, A


def _jacobi_sweep(sc, D, weights):
    """One sweep of exact pairwise rotations of ``D``.

    Minimises sum_g tr(W_g D diag(weights_g) D') over orthogonal D by
    optimising each plane rotation (j, k) in closed form.
    """
    d = sc.d
    WD = np.einsum("gij,jk->gik", sc.W, D)
    for j in range(d - 1):
        for k in range(j + 1, d):
            dj = D[:, j]
            dk = D[:, k]
            a = WD[:, :, j] @ dj
            e = WD[:, :, k] @ dk
            b = WD[:, :, k] @ dj
            diff = weights[:, j] - weights[:, k]
            P = 0.5 * np.dot(diff, a - e)
            Q = np.dot(diff, b)
            if P * P + Q * Q <= 1e-300:
                continue
            # f(theta) = const + P cos(2 theta) + Q sin(2 theta)
            theta = 0.5 * np.arctan2(-Q, -P)
            c, s = np.cos(theta), np.sin(theta)
            new_j = c * dj + s * dk
            new_k = -s * dj + c * dk
            D[:, j] = new_j
            D[:, k] = new_k
            wj = WD[:, :, j].copy()
            wk = WD[:, :, k].copy()
            WD[:, :, j] = c * wj + s * wk
            WD[:, :, k] = -s * wj + c * wk
    return D


def _common_orientation(start):
    """Shared eigenvector basis of a set of commuting covariances."""
    G = start.shape[0]
    # generic weights so ties in one matrix are broken by the others
    c = 1.0 + np.arange(G) * np.sqrt(2.0) / G
    vols = _volumes_from(start, G)
    M = np.einsum("g,gij->ij", c / vols, start)
    _, vecs = _eigh_desc(0.5 * (M + M.T))
    return vecs


def _ve_run(sc, D, equal_volume, tol, max_iter):
    D = D.copy()
    prev = -np.inf
    sigmas = None
    for _ in range(max_iter):
        lam, A = _shape_volume_given_D(sc, D, equal_volume)
        sigmas = np.einsum("ij,g,gj,kj->gik", D, lam, A, D)
        cur = objective(sigmas, sc)
        if _converged(prev, cur, tol):
            break
        prev = cur
        D = _jacobi_sweep(sc, D, 1.0 / (lam[:, None] * A))
    return sigmas, cur


def _ve(sc, start, tol, max_iter, equal_volume):
    if start is not None:
        sigmas, _ = _ve_run(sc, _common_orientation(start), equal_volume, tol, max_iter)
        return sigmas
    candidates = [sc.W.sum(axis=0)] + ([W for W in sc.W] if sc.G > 1 else [])
    best, best_val = None, -np.inf
    for S in candidates:
        _, D0 = _eigh_desc(S)
        try:
            sigmas, val = _ve_run(sc, D0, equal_volume, tol, max_iter)
        except DegeneracyError:
            continue
        if val > best_val:
            best, best_val = sigmas, val
    if best is None:
        raise DegeneracyError("no admissible common orientation")
    return best


# ---------------------------------------------------------------------------
# variable orientation


def _eigs_all(sc):
    vals = np.empty((sc.G, sc.d))
    vecs = np.empty((sc.G, sc.d, sc.d))
    for g in range(sc.G):
        vals[g], vecs[g] = _eigh_desc(sc.W[g])
    return vals, vecs


def _eev(sc):
    omega, L = _eigs_all(sc)
    S = omega.sum(axis=0)
    gm = _geo(S)
    A = S / gm
    lam = gm / sc.N
    return np.einsum("gij,j,gkj->gik", L, lam * A, L)


def _vev(sc, start, tol, max_iter):
    d = sc.d
    omega, L = _eigs_all(sc)
    if start is not None:
        lam = _volumes_from(start, sc.G)
    else:
        lam = omega.sum(axis=1) / (sc.n * d)
    prev = -np.inf
    for _ in range(max_iter):
        s = (omega / lam[:, None]).sum(axis=0)
        A = s / _geo(s)
        lam = (omega / A[None]).sum(axis=1) / (sc.n * d)
        if np.any(lam <= 0):
            raise DegeneracyError("zero volume")
        sigmas = np.einsum("gij,g,j,gkj->gik", L, lam, A, L)
        cur = objective(sigmas, sc)
        if _converged(prev, cur, tol):
            break
        prev = cur
    return sigmas


def _evv(sc):
    dets = np.array([_geo(np.linalg.eigvalsh(W)) for W in sc.W])
    lam = dets.sum() / sc.N
    return lam * sc.W / dets[:, None, None]


def _vvv(sc):
    return sc.W / sc.n[:, None, None]


def estimate_sigma(
    structure,
    scatter: ScatterInput,
    start: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Maximum-likelihood component covariances under ``structure``.

    Parameters
    ----------
    structure : CovarianceStructure or str
    scatter : ScatterInput
    start : (G, d, d) array, optional
        Previous estimate obeying the same structure. Iterative schemes
        start from it, which makes the update monotone inside EM.
    tol, max_iter
        Inner-loop stopping rule for the iterative structures: relative
        objective change below ``tol`` or ``max_iter`` sweeps.

    Returns
    -------
    (G, d, d) array

    Raises
    ------
    DegeneracyError
        If the constrained optimum is numerically singular.
    """
    s = CovarianceStructure.parse(structure)
    sc = scatter
    if start is not None:
        start = np.asarray(start, dtype=float)
        if start.shape != sc.W.shape:
            start = None
    code = s.value
    if code == "EII":
        out = _eii(sc)
    elif code == "VII":
        out = _vii(sc)
    elif code == "EEI":
        out = _eei(sc)
    elif code == "VEI":
        out = _vei(sc, start, tol, max_iter)
    elif code == "EVI":
        out = _evi(sc)
    elif code == "VVI":
        out = _vvi(sc)
    elif code == "EEE":
        out = _eee(sc)
    elif code == "VEE":
        out = _vee(sc, start, tol, max_iter)
    elif code == "EVE":
        out = _ve(sc, start, tol, max_iter, equal_volume=True)
    elif code == "VVE":
        out = _ve(sc, start, tol, max_iter, equal_volume=False)
    elif code == "EEV":
        out = _eev(sc)
    elif code == "VEV":
        out = _vev(sc, start, tol, max_iter)
    elif code == "EVV":
        out = _evv(sc)
    else:
        out = _vvv(sc)
    out = 0.5 * (out + np.swapaxes(out, 1, 2))
    _check_spd(out)
    return out


# ---------------------------------------------------------------------------
# structure verification


def _close(a, b, rtol, scale):
    return np.all(np.abs(np.asarray(a) - np.asarray(b)) <= rtol * scale)


def constraint_check(structure, sigmas, rtol: float = 1e-8) -> bool:
    """True iff ``sigmas`` obey the equality/diagonality pattern of ``structure``."""
    s = CovarianceStructure.parse(structure)
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim == 2:
        sigmas = sigmas[None]
    G, d, _ = sigmas.shape
    for S in sigmas:
        if not _close(S, S.T, rtol, np.max(np.abs(S))):
            return False
        if np.linalg.eigvalsh(S)[0] <= 0:
            return False
    lam = np.array([_geo(np.linalg.eigvalsh(S)) for S in sigmas])
    if s.volume == "E" and not _close(lam, lam[0], rtol, lam[0]):
        return False
    shapes = sigmas / lam[:, None, None]
    eye = np.eye(d)

    if s.orientation == "I":
        off = sigmas - np.array([np.diag(np.diag(S)) for S in sigmas])
        if np.any(np.abs(off) > rtol * np.max(np.abs(sigmas), axis=(1, 2))[:, None, None]):
            return False
        if s.shape == "I":
            return bool(_close(shapes, eye[None], rtol, 1.0))
        if s.shape == "E":
            diag = np.diagonal(shapes, axis1=1, axis2=2)
            return bool(_close(diag, diag[0], rtol, np.max(diag)))
        return True

    if s.orientation == "E":
        if s.shape == "E":
            return bool(_close(shapes, shapes[0], rtol, np.max(np.abs(shapes))))
        for g in range(G):
            for h in range(g + 1, G):
                comm = sigmas[g] @ sigmas[h] - sigmas[h] @ sigmas[g]
                scale = np.linalg.norm(sigmas[g]) * np.linalg.norm(sigmas[h])
                if np.max(np.abs(comm)) > rtol * scale:
                    return False
        return True

    if s.shape == "E":
        ev = np.array([np.linalg.eigvalsh(S)[::-1] for S in shapes])
        return bool(_close(ev, ev[0], rtol, np.max(ev)))
    return True
