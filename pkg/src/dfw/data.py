"""Core domain types shared across the package."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyArmError,
    SchemaError,
    ShapeMismatchError,
    TreatmentCodingError,
)

ROLES = ("instrumental", "confounder", "adjustment", "noise")
SCHEMES = ("DFW", "IPW", "CBPS", "OVERLAP", "UNIT")


def _frozen(a, dtype=float):
    if a is None:
        return None
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """Covariates, treatment and outcomes for one dataset.

    Arrays are copied and marked read-only on construction. Potential
    outcomes are optional because real observational tables only carry
    the factual outcome.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome_factual: np.ndarray
    outcome_y0: np.ndarray | None = None
    outcome_y1: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    feature_roles: tuple[str, ...] | None = None
    n_treatments: int = 2
    true_propensity: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = _frozen(self.covariates)
        if x.ndim == 1:
            x = _frozen(x.reshape(-1, 1))
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "treatment", _frozen(self.treatment, dtype=np.int64))
        object.__setattr__(self, "outcome_factual", _frozen(self.outcome_factual))
        object.__setattr__(self, "outcome_y0", _frozen(self.outcome_y0))
        object.__setattr__(self, "outcome_y1", _frozen(self.outcome_y1))
        object.__setattr__(self, "true_propensity", _frozen(self.true_propensity))
        if not self.feature_names and x.ndim == 2:
            names = tuple(f"x{j + 1}" for j in range(x.shape[1]))
            object.__setattr__(self, "feature_names", names)
        else:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.feature_roles is not None:
            object.__setattr__(self, "feature_roles", tuple(self.feature_roles))

    @property
    def n(self) -> int:
        return int(self.covariates.shape[0])

    @property
    def k(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def has_potential_outcomes(self) -> bool:
        return self.outcome_y0 is not None and self.outcome_y1 is not None

    def subset(self, rows) -> "DatasetBundle":
        """Return a bundle restricted to ``rows`` (index array or mask)."""
        rows = np.asarray(rows)

        def take(a):
            return None if a is None else a[rows]

        return replace(
            self,
            covariates=self.covariates[rows],
            treatment=self.treatment[rows],
            outcome_factual=self.outcome_factual[rows],
            outcome_y0=take(self.outcome_y0),
            outcome_y1=take(self.outcome_y1),
            true_propensity=take(self.true_propensity),
            metadata=dict(self.metadata),
        )

    def with_covariates(self, covariates) -> "DatasetBundle":
        return replace(self, covariates=covariates, metadata=dict(self.metadata))

    def identical_to(self, other: "DatasetBundle") -> bool:
        """Bit-for-bit comparison of every array field and the labels."""
        for name in ("covariates", "treatment", "outcome_factual", "outcome_y0",
                     "outcome_y1", "true_propensity"):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and (a.shape != b.shape or a.tobytes() != b.tobytes()):
                return False
        return (self.feature_names == other.feature_names
                and self.feature_roles == other.feature_roles
                and self.n_treatments == other.n_treatments)


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    scheme: str

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown weighting scheme {self.scheme!r}")
        object.__setattr__(self, "weights", _frozen(self.weights))

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class PropensityFit:
    """Fitted treatment-assignment model.

    ``probabilities`` is the n x M matrix of floored class probabilities for
    the rows the model was fitted on; column ``m`` holds P(T = m | x).
    """

    coefficients: np.ndarray
    probabilities: np.ndarray
    estimator: str
    probability_floor: float = 1e-6
    iterations: int = 0
    objective_trace: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen(self.coefficients))
        object.__setattr__(self, "probabilities", _frozen(self.probabilities))

    @property
    def propensity(self) -> np.ndarray:
        """P(T = 1 | x) for binary fits."""
        return self.probabilities[:, 1]


def validate_bundle(bundle: DatasetBundle, require_both_arms: bool = True) -> DatasetBundle:
    """Check shape, coding and factual-consistency invariants.

    Returns the same object when every check passes, so validation is
    idempotent.
    """
    x = bundle.covariates
    if x.ndim != 2:
        raise ShapeMismatchError(f"covariates must be 2-D, got shape {x.shape}")
    n, k = x.shape
    if n == 0:
        raise ShapeMismatchError("bundle has no rows")
    if k < 1:
        raise ShapeMismatchError("bundle has no covariate columns")
    lengths = {"treatment": len(bundle.treatment), "outcome_factual": len(bundle.outcome_factual)}
    for name in ("outcome_y0", "outcome_y1", "true_propensity"):
        a = getattr(bundle, name)
        if a is not None:
            lengths[name] = len(a)
    bad = {name: m for name, m in lengths.items() if m != n}
    if bad:
        raise ShapeMismatchError(f"expected {n} rows, got {bad}")
    if len(bundle.feature_names) != k:
        raise ShapeMismatchError(f"{len(bundle.feature_names)} feature names for {k} columns")
    if bundle.feature_roles is not None:
        if len(bundle.feature_roles) != k:
            raise ShapeMismatchError(f"{len(bundle.feature_roles)} feature roles for {k} columns")
        unknown = set(bundle.feature_roles) - set(ROLES)
        if unknown:
            raise SchemaError(f"unknown feature roles {sorted(unknown)}")

    m = bundle.n_treatments
    t = bundle.treatment
    if m < 2:
        raise TreatmentCodingError("need at least two treatment levels")
    if t.min() < 0 or t.max() >= m:
        raise TreatmentCodingError(f"treatment values must lie in 0..{m - 1}")
    if require_both_arms:
        counts = np.bincount(t, minlength=m)
        if m == 2 and (counts == 0).any():
            raise EmptyArmError(f"arm sizes {counts.tolist()}")

    if bundle.has_potential_outcomes:
        expected = np.where(t == 1, bundle.outcome_y1, bundle.outcome_y0)
        if expected.tobytes() != bundle.outcome_factual.tobytes():
            raise SchemaError("factual outcome disagrees with the potential outcomes")
    return bundle


def write_bundle_csv(bundle: DatasetBundle, path, config: dict | None = None) -> Path:
    """Write a bundle as CSV, plus ``<stem>.json`` holding ``config``.

    Columns: covariates by name, t, y_factual, then y0, y1 and
    true_propensity when present. Floats use ``repr`` so round trips are
    exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(bundle.feature_names) + ["t", "y_factual"]
    cols = [bundle.covariates[:, j] for j in range(bundle.k)]
    cols += [bundle.treatment, bundle.outcome_factual]
    for name, a in (("y0", bundle.outcome_y0), ("y1", bundle.outcome_y1),
                    ("true_propensity", bundle.true_propensity)):
        if a is not None:
            header.append(name)
            cols.append(a)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(bundle.n):
            w.writerow([repr(int(c[i])) if c.dtype.kind == "i" else repr(float(c[i])) for c in cols])
    sidecar = {"config": config or {}, "feature_roles": bundle.feature_roles}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_bundle_csv(path) -> DatasetBundle:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise SchemaError(f"{path} has no data rows")
    header, body = rows[0], rows[1:]
    if "t" not in header or "y_factual" not in header:
        raise SchemaError(f"{path} lacks 't' / 'y_factual' columns")
    try:
        data = np.array(body, dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    idx = {h: i for i, h in enumerate(header)}
    reserved = {"t", "y_factual", "y0", "y1", "true_propensity"}
    feats = [h for h in header if h not in reserved]
    roles = None
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        roles = json.loads(sidecar.read_text()).get("feature_roles")
    opt = {k: (data[:, idx[k]] if k in idx else None) for k in ("y0", "y1", "true_propensity")}
    return validate_bundle(DatasetBundle(
        covariates=data[:, [idx[f] for f in feats]],
        treatment=data[:, idx["t"]].astype(np.int64),
        outcome_factual=data[:, idx["y_factual"]],
        outcome_y0=opt["y0"],
        outcome_y1=opt["y1"],
        feature_names=tuple(feats),
        feature_roles=tuple(roles) if roles else None,
        true_propensity=opt["true_propensity"],
    ))
