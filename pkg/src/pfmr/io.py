"""CSV ingestion, run configuration and result files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    STRUCTURES,
    ComponentParams,
    ConcomitantWeights,
    CovarianceStructure,
    Dataset,
    Family,
    FitResult,
    MixtureModel,
    PfmrError,
    StaticWeights,
    parse_structures,
)

BUNDLED = {"crabs": "crabs.csv"}


class ConfigError(PfmrError):
    pass


class ParseError(PfmrError):
    pass


def bundled_path(name: str) -> Path:
    try:
        fname = BUNDLED[name]
    except KeyError:
        raise ConfigError(f"no bundled data set named {name!r}") from None
    return Path(str(resources.files("pfmr") / "data" / fname))


def resolve_input(path) -> Path:
    """Path to a CSV file; ``crabs`` (or ``@crabs``) names the bundled copy."""
    s = str(path)
    if s.lstrip("@") in BUNDLED and not Path(s).exists():
        return bundled_path(s.lstrip("@"))
    return Path(s)


def _split(names) -> tuple:
    if names is None:
        return ()
    if isinstance(names, str):
        return tuple(n.strip() for n in names.split(",") if n.strip())
    return tuple(names)


def read_table(path):
    path = resolve_input(path)
    if not path.exists():
        raise ConfigError(f"input file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    return header, rows


def _numeric(header, rows, names, path):
    idx = []
    for n in names:
        if n not in header:
            raise ConfigError(f"column {n!r} not found in {path}; header is {header}")
        idx.append(header.index(n))
    out = np.empty((len(rows), len(idx)))
    for i, row in enumerate(rows):
        for j, c in enumerate(idx):
            cell = row[c].strip() if c < len(row) else ""
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if cell == "" or not math.isfinite(v):
                raise ParseError(
                    f"{path}: row {i + 2}, column {names[j]!r}: "
                    f"non-numeric cell {cell!r}")
            out[i, j] = v
    return out


def load_csv(path, responses, covariates, concomitants=None) -> Dataset:
    """Read the selected numeric columns of a headed CSV file.

    ``concomitants`` defaults to ``covariates``. Row order is preserved.
    Line numbers in error messages count the header as line 1.
    """
    responses = _split(responses)
    covariates = _split(covariates)
    concomitants = _split(concomitants) or covariates
    if not responses:
        raise ConfigError("at least one response column is required")
    overlap = set(responses) & (set(covariates) | set(concomitants))
    if overlap:
        raise ConfigError(f"columns used both as response and covariate: {sorted(overlap)}")
    header, rows = read_table(path)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    Y = _numeric(header, rows, responses, path)
    X = _numeric(header, rows, covariates, path) if covariates else np.zeros((len(rows), 0))
    V = _numeric(header, rows, concomitants, path) if concomitants else np.zeros((len(rows), 0))
    return Dataset(Y, X, V, response_names=responses, covariate_names=covariates,
                   concomitant_names=concomitants)


def read_labels(path, column=None) -> np.ndarray:
    """Labels from a CSV column, or from a one-label-per-line file."""
    header, rows = read_table(path)
    if column is None:
        if len(header) == 1:
            column = header[0]
        else:
            raise ConfigError(f"{path} has several columns; choose one of {header}")
    if column not in header:
        raise ConfigError(f"column {column!r} not found in {path}")
    c = header.index(column)
    return np.array([r[c].strip() for r in rows])


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    input: str = "crabs"
    responses: tuple = ()
    covariates: tuple = ()
    concomitants: tuple = ()
    label_column: Optional[str] = None
    families: tuple = ("eFMR", "eFMRC")
    G_range: tuple = (1, 2, 3, 4)
    structures: tuple = tuple(s.value for s in STRUCTURES)
    seed: int = 0
    n_random_starts: int = 4
    use_kmeans_start: bool = True
    epsilon: float = 1e-5
    max_iter: int = 1000
    min_component_fraction: float = 0.02
    n_jobs: int = 1
    output_dir: str = "pfmr-out"

    def __post_init__(self):
        self.responses = _split(self.responses)
        self.covariates = _split(self.covariates)
        self.concomitants = _split(self.concomitants)
        self.families = tuple(Family.parse(f).value for f in _split(self.families))
        self.structures = tuple(s.value for s in parse_structures(self.structures))
        self.G_range = parse_g_range(self.G_range)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            d = json.load(fh)
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def parse_g_range(value) -> tuple:
    """``"1-9"``, ``"2,3"``, ``4`` or a sequence of ints."""
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        out = []
        for part in value.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part or ".." in part:
                lo, hi = part.replace("..", "-").split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        return tuple(out)
    return tuple(int(g) for g in value)


# ---------------------------------------------------------------------------
# outputs


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return "NA" if x is None or math.isnan(x) else ("-inf" if x < 0 else "inf")
    return f"{x:.6f}"


def ranked_table(report) -> str:
    lines = ["rank\tfamily\tstructure\tG\tbic\tloglik\tn_params\tconverged\tstatus\tstart\titerations"]
    for fam in report.spec.families:
        for rank, cell in enumerate(report.ranked(fam), start=1):
            r = cell.result
            lines.append("\t".join([
                str(rank), fam.value, cell.structure.value, str(cell.G), _fmt(r.bic),
                _fmt(r.loglik), str(r.n_params), str(int(r.converged)), r.status,
                str(cell.start_id), str(r.iterations),
            ]))
    return "\n".join(lines) + "\n"


def model_to_dict(result: FitResult, data: Optional[Dataset] = None) -> dict:
    m = result.model
    d = {
        "family": result.family.value,
        "structure": result.structure.value,
        "G": result.G,
        "loglik": result.loglik,
        "bic": result.bic,
        "n_params": result.n_params,
        "converged": result.converged,
        "iterations": result.iterations,
        "components": [
            {"B": c.B.tolist(), "Sigma": c.Sigma.tolist()} for c in m.components
        ],
    }
    if isinstance(m.weights, ConcomitantWeights):
        d["weights"] = {"type": "concomitant", "alpha": m.weights.alpha.tolist()}
    else:
        d["weights"] = {"type": "static", "pi": m.weights.pi.tolist()}
    if data is not None:
        d["responses"] = list(data.response_names)
        d["covariates"] = list(data.covariate_names)
        d["concomitants"] = list(data.concomitant_names)
    return d


def model_from_dict(d: dict) -> MixtureModel:
    comps = tuple(
        ComponentParams(np.array(c["B"], dtype=float), np.array(c["Sigma"], dtype=float))
        for c in d["components"]
    )
    w = d["weights"]
    if w["type"] == "concomitant":
        weights = ConcomitantWeights(np.array(w["alpha"], dtype=float))
    else:
        weights = StaticWeights(np.array(w["pi"], dtype=float))
    return MixtureModel(CovarianceStructure.parse(d["structure"]), comps, weights)


def write_model(path, result: FitResult, data: Optional[Dataset] = None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(result, data), fh, indent=2)
        fh.write("\n")


def read_model(path) -> MixtureModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def assignments_table(result: FitResult) -> str:
    G = result.G
    lines = ["row\t" + "\t".join(f"tau_{g + 1}" for g in range(G)) + "\tlabel"]
    for i, (row, lab) in enumerate(zip(result.tau, result.labels), start=1):
        lines.append(f"{i}\t" + "\t".join(f"{v:.8f}" for v in row) + f"\t{lab + 1}")
    return "\n".join(lines) + "\n"


def confusion_table(cont) -> str:
    lines = ["truth\t" + "\t".join(str(c + 1) if isinstance(c, int) else str(c)
                                   for c in cont.col_labels)]
    for lab, row in zip(cont.row_labels, cont.table):
        lines.append(f"{lab}\t" + "\t".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
