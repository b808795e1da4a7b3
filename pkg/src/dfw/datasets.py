"""Loaders for the IHDP and Jobs benchmark tables.

Nothing here is vendored. ``fetch_repository_archive`` downloads the data
repository named in ``DATA_URL``; tests that need the real files are skipped
unless ``DFW_DATA_DIR`` points at them.

IHDP manifest (one CSV per realization, ``ihdp_npci_<k>.csv``, 1-based)::

    treatment, y_factual, y_cfactual, mu0, mu1, x1 .. x25

The header row is optional; when present it must match the manifest.
An ``.npz`` stack with arrays ``x`` (n x 25 x R), ``t``, ``yf``, ``ycf``
(n x R) is accepted as well.

Jobs manifest (header required)::

    age, educ, black, hisp, married, nodegr, re74, re75, treat, re78

``treatment``/``t`` are accepted for ``treat``, ``nodegree`` for
``nodegr``, ``hispan`` for ``hisp``, and a ``race`` column with levels
``black``/``hispan``/``white`` is expanded into the two indicators.
"""

from __future__ import annotations

import csv
import io
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetBundle, validate_bundle
from .errors import CountError, MissingRealizationError, SchemaError

DATA_URL = "https://github.com/askhanatgithub/DFW"
ARCHIVE_URL = DATA_URL + "/archive/refs/heads/main.zip"

IHDP_N, IHDP_TREATED, IHDP_K = 747, 139, 25
IHDP_COLUMNS = ("treatment", "y_factual", "y_cfactual", "mu0", "mu1") + tuple(f"x{j}" for j in range(1, 26))

JOBS_N, JOBS_TREATED = 614, 185
JOBS_COVARIATES = ("age", "educ", "black", "hisp", "married", "nodegr", "re74", "re75")
JOBS_BINARY = ("black", "hisp", "married", "nodegr")
_JOBS_ALIASES = {"treatment": "treat", "t": "treat", "nodegree": "nodegr", "hispan": "hisp"}


@dataclass(frozen=True)
class IhdpRealization:
    realization_index: int
    bundle: DatasetBundle


@dataclass(frozen=True)
class JobsTable:
    bundle: DatasetBundle


def standardize(bundle: DatasetBundle, reference: DatasetBundle | None = None) -> DatasetBundle:
    """Z-score non-binary covariates using the means/SDs of ``reference``."""
    ref = (reference or bundle).covariates
    x = bundle.covariates.copy()
    for j in range(x.shape[1]):
        col = ref[:, j]
        if np.isin(col, (0.0, 1.0)).all():
            continue
        sd = col.std()
        if sd > 0:
            x[:, j] = (x[:, j] - col.mean()) / sd
    return bundle.with_covariates(x)


def _read_rows(path: Path):
    with path.open(newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        delim = "," if sample.count(",") >= sample.count(" ") or "," in sample else None
        if delim:
            rows = [r for r in csv.reader(fh) if r]
        else:
            rows = [line.split() for line in fh if line.strip()]
    return [[c.strip() for c in r] for r in rows]


def _is_header(row) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return True
    return False


def _ihdp_bundle(t, yf, ycf, x, index):
    if x.shape[1] != IHDP_K:
        raise SchemaError(f"IHDP realization {index}: expected {IHDP_K} covariates, got {x.shape[1]}")
    if not np.isin(t, (0.0, 1.0)).all():
        raise SchemaError(f"IHDP realization {index}: treatment column is not binary")
    t = t.astype(np.int64)
    if len(t) != IHDP_N or int(t.sum()) != IHDP_TREATED:
        raise CountError(f"IHDP realization {index}: {len(t)} rows / {int(t.sum())} treated, "
                         f"expected {IHDP_N} / {IHDP_TREATED}")
    y1 = np.where(t == 1, yf, ycf)
    y0 = np.where(t == 1, ycf, yf)
    bundle = DatasetBundle(
        covariates=x, treatment=t, outcome_factual=yf, outcome_y0=y0, outcome_y1=y1,
        feature_names=tuple(f"x{j}" for j in range(1, 26)),
        metadata={"dataset": "ihdp", "realization": index})
    return IhdpRealization(index, validate_bundle(bundle))


def load_ihdp(path, realization_index: int) -> IhdpRealization:
    """Load one IHDP realization (1-based index).

    ``path`` may be a directory of ``ihdp_npci_<k>.csv`` files, a single
    realization CSV (index must be 1), or an ``.npz`` stack.
    """
    path = Path(path)
    if realization_index < 1:
        raise MissingRealizationError(f"realization indices are 1-based, got {realization_index}")
    if path.suffix == ".npz":
        data = np.load(path)
        reps = data["t"].shape[-1] if data["t"].ndim == 2 else 1
        if realization_index > reps:
            raise MissingRealizationError(f"{path} holds {reps} realizations")
        k = realization_index - 1
        pick = (lambda a: a[..., k]) if data["t"].ndim == 2 else (lambda a: a)
        return _ihdp_bundle(pick(data["t"]).astype(float), pick(data["yf"]).astype(float),
                            pick(data["ycf"]).astype(float), pick(data["x"]).astype(float),
                            realization_index)
    if path.is_dir():
        path = path / f"ihdp_npci_{realization_index}.csv"
        if not path.exists():
            raise MissingRealizationError(f"no file for realization {realization_index}: {path}")
    elif realization_index != 1:
        raise MissingRealizationError(f"{path} is a single realization; index must be 1")
    elif not path.exists():
        raise MissingRealizationError(f"{path} does not exist")

    rows = _read_rows(path)
    if rows and _is_header(rows[0]):
        header = tuple(c.lower() for c in rows[0])
        if header != IHDP_COLUMNS:
            raise SchemaError(f"{path}: header {header} does not match the IHDP manifest")
        rows = rows[1:]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if widths != {len(IHDP_COLUMNS)}:
        raise SchemaError(f"{path}: expected {len(IHDP_COLUMNS)} columns, got {sorted(widths)}")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return _ihdp_bundle(data[:, 0], data[:, 1], data[:, 2], data[:, 5:], realization_index)


def load_jobs(path) -> JobsTable:
    """Load the 614-row Jobs table (outcome: 1978 earnings)."""
    path = Path(path)
    rows = _read_rows(path)
    if not rows or not _is_header(rows[0]):
        raise SchemaError(f"{path}: a header row is required")
    header = [h.strip('"').lower() for h in rows[0]]
    header = [_JOBS_ALIASES.get(h, h) for h in header]
    body = rows[1:]
    if any(len(r) != len(header) for r in body):
        raise SchemaError(f"{path}: ragged rows")
    cols = {h: [r[i].strip('"') for r in body] for i, h in enumerate(header)}
    if "race" in cols and ("black" not in cols or "hisp" not in cols):
        race = [v.lower() for v in cols.pop("race")]
        unknown = set(race) - {"black", "hispan", "white"}
        if unknown:
            raise SchemaError(f"{path}: unknown race levels {sorted(unknown)}")
        cols["black"] = ["1" if v == "black" else "0" for v in race]
        cols["hisp"] = ["1" if v == "hispan" else "0" for v in race]
    missing = [c for c in JOBS_COVARIATES + ("treat", "re78") if c not in cols]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    try:
        x = np.column_stack([np.array(cols[c], dtype=float) for c in JOBS_COVARIATES])
        t = np.array(cols["treat"], dtype=float)
        y = np.array(cols["re78"], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    for j, name in enumerate(JOBS_COVARIATES):
        if name in JOBS_BINARY and not np.isin(x[:, j], (0.0, 1.0)).all():
            raise SchemaError(f"{path}: column {name!r} must be 0/1")
    if not np.isin(t, (0.0, 1.0)).all():
        raise SchemaError(f"{path}: treatment column must be 0/1")
    if len(t) != JOBS_N or int(t.sum()) != JOBS_TREATED:
        raise CountError(f"{path}: {len(t)} rows / {int(t.sum())} treated, expected {JOBS_N} / {JOBS_TREATED}")
    bundle = DatasetBundle(covariates=x, treatment=t.astype(np.int64), outcome_factual=y,
                           feature_names=JOBS_COVARIATES, metadata={"dataset": "jobs"})
    return JobsTable(validate_bundle(bundle))


def fetch_repository_archive(dest, url: str = ARCHIVE_URL) -> Path:
    """Download and unpack the data repository archive into ``dest``."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(url, timeout=60) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        zf.extractall(dest)
    return dest
