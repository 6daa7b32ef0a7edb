"""Multi-start initialisation and BIC model selection over a grid of
(family, G, covariance structure) cells."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    STRUCTURES,
    CovarianceStructure,
    Dataset,
    Family,
    FitResult,
    NoModelError,
    parse_structures,
)
from .em import EmConfig, fit

log = logging.getLogger(__name__)

KMEANS_START = "kmeans"


def _rng(seed, *keys):
    return np.random.default_rng([int(seed)] + [int(k) for k in keys])


def one_hot(labels, G):
    out = np.zeros((len(labels), G))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def random_init(N: int, G: int, seed: int) -> np.ndarray:
    """Uniform random hard assignment with every component non-empty."""
    if N < G:
        raise ValueError(f"need N >= G, got N={N}, G={G}")
    rng = _rng(seed, N, G)
    while True:
        labels = rng.integers(0, G, size=N)
        if np.unique(labels).size == G:
            return one_hot(labels, G)


def _standardize(Z):
    sd = Z.std(axis=0)
    sd[sd == 0] = 1.0
    return np.ascontiguousarray((Z - Z.mean(axis=0)) / sd)


def _lloyd(Z, centers, max_iter):
    G = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        new, dist = kernels.nearest_center(Z, centers)
        counts = np.bincount(new, minlength=G)
        for g in np.flatnonzero(counts == 0):
            # reseed an empty cluster at the point farthest from its center
            far = int(np.argmax(dist))
            new[far] = g
            dist[far] = 0.0
            counts = np.bincount(new, minlength=G)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([Z[labels == g].mean(axis=0) for g in range(G)])
    _, dist = kernels.nearest_center(Z, centers)
    inertia = float(np.sum((Z - centers[labels]) ** 2))
    return labels, inertia


def kmeans_labels(Z, G, seed, n_init=10, max_iter=100):
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts."""
    Z = np.ascontiguousarray(Z, dtype=float)
    N = Z.shape[0]
    rng = _rng(seed, N, G, 7)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        idx = [int(rng.integers(N))]
        d2 = ((Z - Z[idx[0]]) ** 2).sum(axis=1)
        for _ in range(1, G):
            total = d2.sum()
            if total <= 0:
                nxt = int(rng.integers(N))
            else:
                nxt = int(rng.choice(N, p=d2 / total))
            idx.append(nxt)
            d2 = np.minimum(d2, ((Z - Z[nxt]) ** 2).sum(axis=1))
        labels, inertia = _lloyd(Z, Z[idx].copy(), max_iter)
        if inertia < best_inertia - 1e-12:
            best, best_inertia = labels, inertia
    return best


def kmeans_init(data: Dataset, G: int, seed: int, n_init: int = 10) -> np.ndarray:
    """Hard responsibilities from k-means on the standardised ``[X | Y]``."""
    if data.N < G:
        raise ValueError(f"need N >= G, got N={data.N}, G={G}")
    if G == 1:
        return np.ones((data.N, 1))
    Z = _standardize(np.hstack([data.X, data.Y]))
    return one_hot(kmeans_labels(Z, G, seed, n_init=n_init), G)


@dataclass(frozen=True)
class SearchSpec:
    families: tuple = (Family.EFMR, Family.EFMRC)
    G_range: tuple = (1, 2, 3, 4)
    structures: tuple = STRUCTURES
    n_random_starts: int = 4
    use_kmeans_start: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(Family.parse(f) for f in self.families))
        object.__setattr__(self, "structures", tuple(parse_structures(self.structures)))
        object.__setattr__(self, "G_range", tuple(int(g) for g in self.G_range))
        if not self.families or not self.G_range or not self.structures:
            raise ValueError("search spec needs at least one family, G and structure")
        if min(self.G_range) < 1:
            raise ValueError("G must be >= 1")
        if self.n_starts < 1:
            raise ValueError("need at least one start per cell")

    @property
    def n_starts(self) -> int:
        return self.n_random_starts + int(self.use_kmeans_start)

    def start_ids(self) -> list:
        ids = list(range(self.n_random_starts))
        if self.use_kmeans_start:
            ids.append(KMEANS_START)
        return ids


@dataclass
class Cell:
    family: Family
    G: int
    structure: CovarianceStructure
    start_id: object
    result: FitResult
    runs: list = field(default_factory=list, repr=False)

    @property
    def selectable(self) -> bool:
        return self.result.converged and self.result.model is not None

    def sort_key(self):
        r = self.result
        return (r.bic, -r.n_params, -self.G, -self.structure.order)


@dataclass
class SelectionReport:
    cells: List[Cell]
    best: Optional[Cell]
    spec: SearchSpec

    def best_for(self, family) -> Optional[Cell]:
        family = Family.parse(family)
        return _pick_best([c for c in self.cells if c.family is family])

    def ranked(self, family=None) -> List[Cell]:
        cells = self.cells
        if family is not None:
            family = Family.parse(family)
            cells = [c for c in cells if c.family is family]
        ok = sorted((c for c in cells if c.selectable), key=Cell.sort_key, reverse=True)
        rest = [c for c in cells if not c.selectable]
        rest.sort(key=lambda c: (c.family.value, c.G, c.structure.order))
        return ok + rest


def _pick_best(cells) -> Optional[Cell]:
    ok = [c for c in cells if c.selectable]
    if not ok:
        return None
    return max(ok, key=Cell.sort_key)


def initial_responsibilities(data: Dataset, G: int, start_id, seed: int) -> np.ndarray:
    if start_id == KMEANS_START:
        return kmeans_init(data, G, seed)
    if G == 1:
        return np.ones((data.N, 1))
    return random_init(data.N, G, int(seed) * 1000 + int(start_id))


def _fit_task(args):
    data, family, G, structure, init, config = args
    return fit(data, family, G, structure, init, config)


def _best_start(runs):
    def key(item):
        r = item[1]
        return (r.model is not None and r.converged, r.model is not None, r.loglik)

    return max(runs, key=key)


def search(
    data: Dataset,
    spec: SearchSpec,
    em_config: Optional[EmConfig] = None,
    n_jobs: int = 1,
    progress=None,
) -> SelectionReport:
    """Fit every cell from every start and select the maximum-BIC model.

    Raises
    ------
    NoModelError
        If no cell produced a converged fit.
    """
    em_config = em_config or EmConfig()
    inits = {}
    for G in spec.G_range:
        for sid in spec.start_ids():
            if data.N < G:
                raise ValueError(f"N = {data.N} is smaller than G = {G}")
            inits[G, sid] = initial_responsibilities(data, G, sid, spec.seed)

    keys = []
    tasks = []
    for family in spec.families:
        for G in spec.G_range:
            for s in spec.structures:
                for sid in spec.start_ids():
                    keys.append((family, G, s, sid))
                    tasks.append((data, family, G, s, inits[G, sid], em_config))

    if n_jobs == 1:
        results = []
        for i, t in enumerate(tasks):
            results.append(_fit_task(t))
            if progress is not None:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_fit_task, tasks, chunksize=4))

    grouped = {}
    for (family, G, s, sid), res in zip(keys, results):
        grouped.setdefault((family, G, s), []).append((sid, res))

    cells = []
    for (family, G, s), runs in grouped.items():
        sid, res = _best_start(runs)
        cells.append(Cell(family, G, s, sid, res, runs))

    best = _pick_best(cells)
    if best is None:
        raise NoModelError("every cell of the search failed")
    return SelectionReport(cells, best, spec)
