"""Domain types shared across the package.

A fitted mixture of multivariate regressions is described by per-component
regression matrices ``B`` of shape ``(p + 1, d)`` (intercept row first) and
error covariances ``Sigma`` of shape ``(d, d)``, plus a mixing-weight model
that is either a static probability vector or a multinomial logit on
concomitant variables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class PfmrError(Exception):
    """Base class for package errors."""


class DegeneracyError(PfmrError):
    """A fit hit a singular matrix or an undersized component."""


class NumericError(PfmrError):
    """Densities underflowed or parameters became non-finite."""


class NoModelError(PfmrError):
    """Every cell of a model search failed."""


class Family(str, enum.Enum):
    EFMR = "eFMR"
    EFMRC = "eFMRC"

    @classmethod
    def parse(cls, value: Union[str, "Family"]) -> "Family":
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ValueError(f"unknown family {value!r}; expected eFMR or eFMRC")


class CovarianceStructure(str, enum.Enum):
    """The 14 eigen-decomposition constraints, in canonical table order.

    The three letters describe volume, shape and orientation: ``E`` equal
    across components, ``V`` variable, ``I`` identity (spherical shape or
    axis-aligned orientation).
    """

    EII = "EII"
    VII = "VII"
    EEI = "EEI"
    VEI = "VEI"
    EVI = "EVI"
    VVI = "VVI"
    EEE = "EEE"
    VEE = "VEE"
    EVE = "EVE"
    VVE = "VVE"
    EEV = "EEV"
    VEV = "VEV"
    EVV = "EVV"
    VVV = "VVV"

    @classmethod
    def parse(cls, value: Union[str, "CovarianceStructure"]) -> "CovarianceStructure":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown covariance structure {value!r}") from None

    @property
    def volume(self) -> str:
        return self.value[0]

    @property
    def shape(self) -> str:
        return self.value[1]

    @property
    def orientation(self) -> str:
        return self.value[2]

    @property
    def order(self) -> int:
        return STRUCTURES.index(self)


STRUCTURES: tuple = tuple(CovarianceStructure)


@dataclass(frozen=True)
class Dataset:
    """Paired responses ``Y`` (N x d) and covariates ``X`` (N x p).

    ``V`` holds the concomitant covariates (N x q) used by the logit weight
    model; it defaults to ``X``.
    """

    Y: np.ndarray
    X: np.ndarray
    V: Optional[np.ndarray] = None
    response_names: tuple = ()
    covariate_names: tuple = ()
    concomitant_names: tuple = ()
    Xaug: np.ndarray = field(init=False, repr=False)
    Vaug: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.size == 0:
            X = np.zeros((Y.shape[0], 0))
        if Y.ndim != 2 or X.ndim != 2:
            raise ValueError("Y and X must be 2-d arrays")
        if Y.shape[0] < 1 or Y.shape[1] < 1:
            raise ValueError("need N >= 1 and d >= 1")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"Y has {Y.shape[0]} rows but X has {X.shape[0]}")
        if self.V is None:
            V = X
        else:
            V = np.array(self.V, dtype=float)
            if V.ndim == 1:
                V = V[:, None]
            if V.size == 0:
                V = np.zeros((Y.shape[0], 0))
            if V.shape[0] != Y.shape[0]:
                raise ValueError(f"Y has {Y.shape[0]} rows but V has {V.shape[0]}")
        for arr in (Y, X, V):
            if not np.all(np.isfinite(arr)):
                raise ValueError("data contain non-finite values")
            arr.setflags(write=False)
        ones = np.ones((Y.shape[0], 1))
        Xaug = np.ascontiguousarray(np.hstack([ones, X]))
        Vaug = np.ascontiguousarray(np.hstack([ones, V]))
        Xaug.setflags(write=False)
        Vaug.setflags(write=False)
        object.__setattr__(self, "Y", np.ascontiguousarray(Y))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "Xaug", Xaug)
        object.__setattr__(self, "Vaug", Vaug)

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.V.shape[1]


@dataclass(frozen=True)
class ComponentParams:
    B: np.ndarray
    Sigma: np.ndarray


@dataclass(frozen=True)
class StaticWeights:
    pi: np.ndarray

    def matrix(self, n: int) -> np.ndarray:
        return np.broadcast_to(self.pi, (n, self.pi.size))


@dataclass(frozen=True)
class ConcomitantWeights:
    """Multinomial-logit weights; ``alpha`` is G x (q + 1) with row 0 zero."""

    alpha: np.ndarray


@dataclass(frozen=True)
class MixtureModel:
    structure: CovarianceStructure
    components: tuple
    weights: Union[StaticWeights, ConcomitantWeights]

    @property
    def G(self) -> int:
        return len(self.components)

    @property
    def family(self) -> Family:
        if isinstance(self.weights, ConcomitantWeights):
            return Family.EFMRC
        return Family.EFMR

    @property
    def B(self) -> np.ndarray:
        return np.stack([c.B for c in self.components])

    @property
    def Sigma(self) -> np.ndarray:
        return np.stack([c.Sigma for c in self.components])


@dataclass
class FitResult:
    family: Family
    structure: CovarianceStructure
    G: int
    model: Optional[MixtureModel]
    loglik: float
    loglik_trace: np.ndarray
    tau: Optional[np.ndarray]
    labels: Optional[np.ndarray]
    bic: float
    n_params: int
    converged: bool
    iterations: int
    status: str = "converged"
    message: str = ""

    @property
    def failed(self) -> bool:
        return self.model is None


def covariance_params(structure, d: int, G: int) -> int:
    """Free parameters in the G component covariances under ``structure``."""
    s = CovarianceStructure.parse(structure)
    full = d * (d + 1) // 2
    counts = {
        "EII": 1,
        "VII": G,
        "EEI": d,
        "VEI": d + G - 1,
        "EVI": d * G - G + 1,
        "VVI": d * G,
        "EEE": full,
        "VEE": full + G - 1,
        "EVE": full + (G - 1) * (d - 1),
        "VVE": full + (G - 1) * d,
        "EEV": G * full - (G - 1) * d,
        "VEV": G * full - (G - 1) * (d - 1),
        "EVV": G * full - (G - 1),
        "VVV": G * full,
    }
    return counts[s.value]


def n_free_params(family, structure, G: int, d: int, p: int, q: int = 0) -> int:
    """Number of free parameters of a fitted mixture of regressions.

    Covariance parameters follow the eigen-decomposition counts, each
    component carries a ``(p + 1) x d`` coefficient matrix, and the weight
    model contributes ``G - 1`` (static) or ``(G - 1)(q + 1)`` (logit).
    """
    fam = Family.parse(family)
    if G < 1 or d < 1 or p < 0 or q < 0:
        raise ValueError("need G >= 1, d >= 1, p >= 0, q >= 0")
    if fam is Family.EFMR:
        mix = G - 1
    else:
        mix = (G - 1) * (q + 1)
    return covariance_params(structure, d, G) + G * d * (p + 1) + mix


def bic(loglik: float, n_params: int, N: int) -> float:
    """``2 * loglik - n_params * log(N)``; larger is better."""
    if N < 1:
        raise ValueError("N must be positive")
    return 2.0 * loglik - n_params * math.log(N)


def parse_structures(values: Sequence) -> list:
    if isinstance(values, str):
        values = [v for v in values.replace(",", " ").split() if v]
    out = []
    for v in values:
        if str(v).lower() == "all":
            out.extend(STRUCTURES)
        else:
            out.append(CovarianceStructure.parse(v))
    return out
