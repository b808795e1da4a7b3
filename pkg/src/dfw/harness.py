"""Replicated experiments, report files and the weight-CV enumeration study.

A run is described by an ``ExperimentConfig`` (loadable from flat
``key = value`` text, see ``CONFIG_KEYS``). Every replication derives its
own seed from ``SeedSequence([base_seed, replication])``, so results do not
depend on how many worker processes share the loop. Workers only return
plain dictionaries; the parent process writes every file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__, _kernels
from .balance import SMD_THRESHOLD, balance_report, replication_ci
from .config import as_bool, dump_kv, parse_kv
from .data import SCHEMES, DatasetBundle
from .datasets import load_ihdp, load_jobs, standardize
from .effects import DEFAULT_BINDINGS, ESTIMATORS, estimate_weighted_mean_diff, estimate_weighted_regression
from .errors import ConfigError, DFWError, ZeroPooledVarianceError
from .outcome import KernelRidgeConfig, RidgeConfig
from .propensity import CbpsConfig, LogisticConfig, fit_cbps, fit_logistic, predict_propensity
from .synthetic import (
    RoleGenConfig,
    bias_presets,
    generate_linear,
    generate_nonlinear,
    generate_roles,
    nonlinear_presets,
)
from .weighting import cv_of_weights, scheme_weights

REPORT_FORMAT = 1
EVALUATE_SPLITS = ("test", "train", "all")

# documented config keys -> short description (the CLI prints this table)
CONFIG_KEYS = {
    "dataset": "linear:<low|moderate|high> | nonlinear:<low|moderate|high> | roles | ihdp | jobs",
    "schemes": "comma list drawn from DFW, IPW, CBPS, OVERLAP, UNIT",
    "estimators": "overrides, e.g. 'OVERLAP:WEIGHTED_REGRESSION, DFW:WEIGHTED_MEAN_DIFF'",
    "replications": "number of replications (default 30)",
    "split_ratio": "training fraction in (0, 1) (default 0.8)",
    "base_seed": "integer root seed (default 0)",
    "output_dir": "where report files go",
    "linearity": "LINEAR | NONLINEAR | AUTO (AUTO: NONLINEAR for nonlinear:* datasets)",
    "evaluate": "rows scored for effects: test | train | all (default test)",
    "probability_floor": "propensity clip used by the logistic and CBPS fits (default 1e-6)",
    "ridge_penalty": "weighted ridge penalty on the normalised loss (default 1e-3)",
    "kernel_penalty": "kernel ridge penalty on the normalised loss (default 1e-6)",
    "kernel_gamma": "RBF gamma (default 0.02)",
    "standardize": "z-score continuous covariates with training statistics (default true)",
    "n": "sample size override for synthetic datasets",
    "data_path": "IHDP directory/file or Jobs CSV",
    "jobs_ate": "reference ATE used to score Jobs runs (optional)",
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "linear:low"
    schemes: tuple = ("DFW", "IPW", "CBPS", "OVERLAP")
    estimators: tuple = ()  # (scheme, estimator) overrides
    replications: int = 30
    split_ratio: float = 0.8
    base_seed: int = 0
    output_dir: str | None = None
    linearity: str = "AUTO"
    evaluate: str = "test"
    probability_floor: float = 1e-6
    ridge_penalty: float = 1e-3
    kernel_penalty: float = 1e-6
    kernel_gamma: float = 0.02
    standardize: bool = True
    n: int | None = None
    data_path: str | None = None
    jobs_ate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "estimators", tuple(tuple(p) for p in self.estimators))
        if not 0 < self.split_ratio < 1:
            raise ConfigError("split_ratio must lie strictly between 0 and 1")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("schemes must not repeat")
        for s, e in self.estimators:
            if s not in SCHEMES or e not in ESTIMATORS:
                raise ConfigError(f"bad estimator override {s}:{e}")
        if self.linearity not in ("LINEAR", "NONLINEAR", "AUTO"):
            raise ConfigError(f"unknown linearity {self.linearity!r}")
        if self.evaluate not in EVALUATE_SPLITS:
            raise ConfigError(f"evaluate must be one of {EVALUATE_SPLITS}")
        kind = self.dataset.split(":", 1)[0]
        if kind not in ("linear", "nonlinear", "roles", "ihdp", "jobs"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if kind in ("ihdp", "jobs") and not self.data_path:
            raise ConfigError(f"dataset {kind} needs data_path")

    @property
    def resolved_linearity(self) -> str:
        if self.linearity != "AUTO":
            return self.linearity
        return "NONLINEAR" if self.dataset.startswith("nonlinear") else "LINEAR"

    def estimator_for(self, scheme: str) -> str:
        return dict(self.estimators).get(scheme, DEFAULT_BINDINGS[scheme])

    def to_kv(self) -> dict:
        d = asdict(self)
        d["estimators"] = [f"{s}:{e}" for s, e in self.estimators]
        d.pop("output_dir")  # where files go does not change their content
        return d

    def digest(self) -> str:
        return hashlib.sha256(dump_kv(self.to_kv()).encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        raw = parse_kv(text)
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kw: dict = {}
        for key, value in raw.items():
            try:
                if key in ("schemes",):
                    kw[key] = tuple(s.strip().upper() for s in value.split(",") if s.strip())
                elif key == "estimators":
                    pairs = [p.strip() for p in value.split(",") if p.strip()]
                    kw[key] = tuple(tuple(x.strip().upper() for x in p.split(":", 1)) for p in pairs)
                elif key in ("replications", "base_seed", "n"):
                    kw[key] = int(value)
                elif key in ("split_ratio", "probability_floor", "ridge_penalty", "kernel_penalty",
                             "kernel_gamma", "jobs_ate"):
                    kw[key] = float(value)
                elif key == "standardize":
                    kw[key] = as_bool(value)
                elif key in ("linearity",):
                    kw[key] = value.upper()
                else:
                    kw[key] = value
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())


def replication_seed(base_seed: int, replication: int) -> int:
    """32-bit seed for one replication, hashed from the pair."""
    return int(np.random.SeedSequence([int(base_seed), int(replication)]).generate_state(1)[0])


def _split(n, ratio, seed):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(99,))))
    perm = rng.permutation(n)
    n_train = int(round(ratio * n))
    n_train = min(max(n_train, 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def load_dataset(config: ExperimentConfig, replication: int, seed: int) -> DatasetBundle:
    """The full (unsplit) bundle for one replication."""
    kind, _, level = config.dataset.partition(":")
    extra = {"seed": seed}
    if config.n is not None:
        extra["n"] = config.n
    if kind == "linear":
        presets = bias_presets()
        if level not in presets:
            raise ConfigError(f"unknown linear preset {level!r}")
        return generate_linear(replace(presets[level], **extra))
    if kind == "nonlinear":
        presets = nonlinear_presets()
        if level not in presets:
            raise ConfigError(f"unknown nonlinear preset {level!r}")
        return generate_nonlinear(replace(presets[level], **extra))
    if kind == "roles":
        return generate_roles(RoleGenConfig(**extra))
    if kind == "ihdp":
        return load_ihdp(config.data_path, replication + 1).bundle
    return load_jobs(config.data_path).bundle


def _nan_to_none(v):
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else v


def _balance(train, weights, features):
    """Balance report with zero pooled variance mapped to NaN per covariate."""
    try:
        return balance_report(train.covariates, train.treatment, weights, features, with_traces=False)
    except ZeroPooledVarianceError:
        pass
    k = train.k
    out = {"smd_unweighted": np.full(k, np.nan), "smd_weighted": np.full(k, np.nan),
           "ks_unweighted": np.full(k, np.nan), "ks_weighted": np.full(k, np.nan)}
    for j in range(k):
        try:
            r = balance_report(train.covariates[:, [j]], train.treatment, weights, (features[j],),
                               with_traces=False)
        except ZeroPooledVarianceError:
            continue
        for key in out:
            out[key][j] = getattr(r, key)[0]
    return SimpleNamespace(**out)


def run_replication(config: ExperimentConfig, replication: int) -> dict:
    """One split, one set of fits, one row per scheme. Returns a JSON-able log."""
    seed = replication_seed(config.base_seed, replication)
    bundle = load_dataset(config, replication, seed)
    train_idx, test_idx = _split(bundle.n, config.split_ratio, seed)
    train, test = bundle.subset(train_idx), bundle.subset(test_idx)
    if config.standardize:
        test = standardize(test, reference=train)
        train = standardize(train)
    evaluation = {"test": test, "train": train, "all": None}[config.evaluate]
    if evaluation is None:
        evaluation = DatasetBundle(
            covariates=np.vstack([train.covariates, test.covariates]),
            treatment=np.r_[train.treatment, test.treatment],
            outcome_factual=np.r_[train.outcome_factual, test.outcome_factual],
            outcome_y0=None if train.outcome_y0 is None else np.r_[train.outcome_y0, test.outcome_y0],
            outcome_y1=None if train.outcome_y1 is None else np.r_[train.outcome_y1, test.outcome_y1],
            feature_names=train.feature_names)

    floor = config.probability_floor
    logistic = fit_logistic(train.covariates, train.treatment, LogisticConfig(probability_floor=floor))
    cbps = None
    if "CBPS" in config.schemes:
        cbps = fit_cbps(train.covariates, train.treatment, CbpsConfig(probability_floor=floor))
    linearity = config.resolved_linearity
    model_config = (RidgeConfig(penalty=config.ridge_penalty) if linearity == "LINEAR"
                    else KernelRidgeConfig(penalty=config.kernel_penalty, rbf_bandwidth=config.kernel_gamma))

    log = {"replication": replication, "seed": seed, "n_train": train.n, "n_eval": evaluation.n,
           "features": list(train.feature_names), "schemes": {}}
    for scheme in config.schemes:
        try:
            w = scheme_weights(scheme, logistic.probabilities, train.treatment,
                               None if cbps is None else cbps.probabilities)
            estimator = config.estimator_for(scheme)
            if estimator == "WEIGHTED_REGRESSION":
                est = estimate_weighted_regression(train, w, model_config, linearity, evaluation, config.jobs_ate)
            else:
                # weights for the scored rows come from the training-split fits
                fit = cbps if scheme == "CBPS" else logistic
                probs = predict_propensity(fit, evaluation.covariates)
                w_eval = scheme_weights(scheme, probs, evaluation.treatment, probs)
                est = estimate_weighted_mean_diff(evaluation, w_eval, config.jobs_ate)
            bal = _balance(train, w, train.feature_names)
        except DFWError as exc:
            raise type(exc)(f"replication {replication}, scheme {scheme}: {exc}") from exc
        log["schemes"][scheme] = {
            "estimator": estimator,
            "ate_hat": est.ate_hat,
            "ate_true": est.ate_true,
            "epsilon_ate": est.epsilon_ate,
            "pehe": est.pehe,
            "weight_cv": cv_of_weights(w),
            "weights_sha256": hashlib.sha256(np.ascontiguousarray(w.weights).tobytes()).hexdigest(),
            "smd_unweighted": [_nan_to_none(float(v)) for v in bal.smd_unweighted],
            "smd_weighted": [_nan_to_none(float(v)) for v in bal.smd_weighted],
            "ks_unweighted": [_nan_to_none(float(v)) for v in bal.ks_unweighted],
            "ks_weighted": [_nan_to_none(float(v)) for v in bal.ks_weighted],
        }
    return log


def _ecdf_rows(config: ExperimentConfig, replication: int):
    """ECDF traces of every covariate, arm and scheme on one training split."""
    from .balance import weighted_ecdf

    seed = replication_seed(config.base_seed, replication)
    bundle = load_dataset(config, replication, seed)
    train_idx, _ = _split(bundle.n, config.split_ratio, seed)
    train = bundle.subset(train_idx)
    if config.standardize:
        train = standardize(train)
    floor = config.probability_floor
    logistic = fit_logistic(train.covariates, train.treatment, LogisticConfig(probability_floor=floor))
    cbps = None
    if "CBPS" in config.schemes:
        cbps = fit_cbps(train.covariates, train.treatment, CbpsConfig(probability_floor=floor))
    rows = []
    t = train.treatment
    weightings = [("unweighted", np.ones(train.n))]
    for scheme in config.schemes:
        w = scheme_weights(scheme, logistic.probabilities, t, None if cbps is None else cbps.probabilities)
        weightings.append((scheme, w.weights))
    for label, w in weightings:
        for j, name in enumerate(train.feature_names):
            for group, mask in (("treated", t == 1), ("control", t == 0)):
                values, cum = weighted_ecdf(train.covariates[mask, j], w[mask])
                rows.extend((label, name, group, repr(float(v)), repr(float(c))) for v, c in zip(values, cum))
    return rows


# ---------------------------------------------------------------------------
# aggregation, shared by the run and by the audit
# ---------------------------------------------------------------------------

def _summary(values):
    v = np.array([np.nan if x is None else x for x in values], dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"mean": None, "std": None, "n": 0}
    return {"mean": float(v.mean()), "std": float(v.std()), "n": int(v.size)}


def _ci(values):
    v = np.array([np.nan if x is None else x for x in values], dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"lo": None, "mean": None, "hi": None}
    if v.size == 1:
        return {"lo": float(v[0]), "mean": float(v[0]), "hi": float(v[0])}
    lo, mean, hi = replication_ci(v)
    return {"lo": lo, "mean": mean, "hi": hi}


def aggregate(logs: list[dict], schemes) -> dict:
    """Per-scheme summaries from replication logs (pure function of the logs)."""
    out = {}
    features = logs[0]["features"]
    for scheme in schemes:
        rows = [log["schemes"][scheme] for log in logs]
        k = len(features)
        smd_w = [[r["smd_weighted"][j] for r in rows] for j in range(k)]
        smd_u = [[r["smd_unweighted"][j] for r in rows] for j in range(k)]
        ks_w = [[r["ks_weighted"][j] for r in rows] for j in range(k)]
        out[scheme] = {
            "estimator": rows[0]["estimator"],
            "epsilon_ate": _summary([r["epsilon_ate"] for r in rows]),
            "pehe": _summary([r["pehe"] for r in rows]),
            "ate_hat": _summary([r["ate_hat"] for r in rows]),
            "weight_cv": _summary([r["weight_cv"] for r in rows]),
            "balance": {
                name: {
                    "abs_smd_weighted": _ci([None if v is None else abs(v) for v in smd_w[j]]),
                    "abs_smd_unweighted": _ci([None if v is None else abs(v) for v in smd_u[j]]),
                    "ks_weighted": _ci(ks_w[j]),
                    "fraction_below_threshold": _summary(
                        [None if v is None else float(abs(v) < SMD_THRESHOLD) for v in smd_w[j]])["mean"],
                }
                for j, name in enumerate(features)
            },
        }
    return out


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class RunReport:
    config: ExperimentConfig
    logs: list = field(repr=False)
    schemes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        import numba
        import scipy

        payload = {
            "format": REPORT_FORMAT,
            "provenance": {
                "config_sha256": self.config.digest(),
                "config": self.config.to_kv(),
                "seeds": [log["seed"] for log in self.logs],
                "versions": {"dfw": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                             "numba": numba.__version__},
            },
            "linearity": self.config.resolved_linearity,
            "replications": len(self.logs),
            "schemes": self.schemes,
        }
        return _dumps(payload)


def _run_logs(config: ExperimentConfig, workers: int):
    reps = range(config.replications)
    if workers <= 1 or config.replications == 1:
        return [run_replication(config, r) for r in reps]
    with ProcessPoolExecutor(max_workers=workers, initializer=_kernels.set_backend,
                             initargs=(_kernels.get_backend(),)) as pool:
        return list(pool.map(run_replication, [config] * len(reps), reps))


def run_experiment(config: ExperimentConfig, workers: int = 1, write: bool = True) -> RunReport:
    """Run every replication, aggregate, and (optionally) write report files."""
    logs = _run_logs(config, workers)
    report = RunReport(config, logs, aggregate(logs, config.schemes))
    if write and config.output_dir:
        write_report(report, Path(config.output_dir))
    return report


def write_report(report: RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    with (out / "replications.jsonl").open("w") as fh:
        for log in report.logs:
            fh.write(json.dumps(log, sort_keys=True, allow_nan=False) + "\n")
    (out / "config.cfg").write_text(dump_kv({**report.config.to_kv(), "output_dir": report.config.output_dir}))

    def fmt(v):
        return "" if v is None else repr(v)

    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "estimator", "metric", "mean", "std", "n"])
        for scheme, agg in report.schemes.items():
            for metric in ("epsilon_ate", "pehe", "ate_hat", "weight_cv"):
                s = agg[metric]
                w.writerow([scheme, agg["estimator"], metric, fmt(s["mean"]), fmt(s["std"]), s["n"]])

    with (out / "smd.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "feature", "abs_smd_mean", "ci_lo", "ci_hi", "threshold"])
        first = next(iter(report.schemes.values()))
        for name, b in first["balance"].items():
            c = b["abs_smd_unweighted"]
            w.writerow(["unweighted", name, fmt(c["mean"]), fmt(c["lo"]), fmt(c["hi"]), repr(SMD_THRESHOLD)])
        for scheme, agg in report.schemes.items():
            for name, b in agg["balance"].items():
                c = b["abs_smd_weighted"]
                w.writerow([scheme, name, fmt(c["mean"]), fmt(c["lo"]), fmt(c["hi"]), repr(SMD_THRESHOLD)])

    with (out / "ecdf.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "feature", "group", "value", "cumulative"])
        w.writerows(_ecdf_rows(report.config, 0))


def audit_report(report_dir, tol: float = 1e-12) -> list[str]:
    """Recompute ``report.json`` aggregates from ``replications.jsonl``.

    Returns a list of mismatch descriptions (empty when everything agrees).
    """
    report_dir = Path(report_dir)
    stored = json.loads((report_dir / "report.json").read_text())
    logs = [json.loads(line) for line in (report_dir / "replications.jsonl").read_text().splitlines() if line]
    fresh = aggregate(logs, list(stored["schemes"]))
    problems: list[str] = []

    def walk(a, b, path):
        if isinstance(a, dict):
            if set(a) != set(b):
                problems.append(f"{path}: keys differ")
                return
            for key in a:
                walk(a[key], b[key], f"{path}.{key}")
        elif isinstance(a, float) or isinstance(b, float):
            if a is None or b is None or abs(a - b) > tol * max(1.0, abs(a)):
                problems.append(f"{path}: stored {a!r} vs recomputed {b!r}")
        elif a != b:
            problems.append(f"{path}: stored {a!r} vs recomputed {b!r}")

    walk(stored["schemes"], fresh, "schemes")
    if stored["replications"] != len(logs):
        problems.append("replication count differs from the log")
    return problems


# ---------------------------------------------------------------------------
# weight-CV enumeration study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CvStudyResult:
    mode: str
    levels: np.ndarray
    count: int
    wins: int
    cv_dfw: np.ndarray
    cv_ipw: np.ndarray
    multiplicity: np.ndarray  # ordered tuples represented by each row

    @property
    def fraction(self) -> float:
        return self.wins / self.count

    @property
    def weighted_fraction(self) -> float:
        """Fraction counted over ordered tuples (equals ``fraction`` for TUPLES)."""
        win = self.cv_dfw < _tie_cut(self.cv_dfw, self.cv_ipw)
        return float(self.multiplicity[win].sum() / self.multiplicity.sum())


def _tie_cut(cv_dfw, cv_ipw, rel=1e-12):
    # DFW wins only when strictly below IPW by more than rounding noise
    return cv_ipw - rel * np.maximum(np.abs(cv_ipw), np.abs(cv_dfw))


def grid_levels(grid_min=0.1, grid_max=0.9, step=0.1) -> np.ndarray:
    count = int(round((grid_max - grid_min) / step)) + 1
    levels = np.round(grid_min + step * np.arange(count), 12)
    if count < 2 or levels[0] <= 0 or levels[-1] >= 1:
        raise ConfigError("grid must hold at least two levels strictly inside (0, 1)")
    return levels


def _multisets(levels, size):
    from itertools import combinations_with_replacement
    from math import factorial

    idx = np.array(list(combinations_with_replacement(range(len(levels)), size)), dtype=np.int64)
    mult = np.array([factorial(size) // np.prod([factorial(c) for c in np.bincount(r)]) for r in idx])
    return levels[idx], mult.astype(float)


def run_cv_study(grid_min=0.1, grid_max=0.9, step=0.1, tuple_size=6, mode="TUPLES",
                 output_dir=None) -> CvStudyResult:
    """Enumerate propensity tuples and compare CV of DFW against IPW weights.

    Every hypothetical sample is treated with propensity equal to its
    level, so IPW weights are ``1/p`` and DFW weights ``1 - p``.
    """
    levels = grid_levels(grid_min, grid_max, step)
    if mode == "TUPLES":
        cv_dfw, cv_ipw = _kernels.cv_tuples(levels, tuple_size)
        mult = np.ones(cv_dfw.shape[0])
    elif mode == "MULTISETS":
        rows, mult = _multisets(levels, tuple_size)
        cv_dfw, cv_ipw = _kernels.cv_rows(rows)
    else:
        raise ConfigError(f"unknown enumeration mode {mode!r}")
    wins = int((cv_dfw < _tie_cut(cv_dfw, cv_ipw)).sum())
    result = CvStudyResult(mode, levels, int(cv_dfw.shape[0]), wins, cv_dfw, cv_ipw, mult)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "cv_diff.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "cv_dfw", "cv_ipw", "difference", "multiplicity"])
            for i in range(result.count):
                w.writerow([i, repr(float(cv_dfw[i])), repr(float(cv_ipw[i])),
                            repr(float(cv_ipw[i] - cv_dfw[i])), int(mult[i])])
        (out / "cv_summary.json").write_text(_dumps({
            "mode": mode, "levels": [float(v) for v in levels], "tuple_size": tuple_size,
            "count": result.count, "wins": wins, "fraction": result.fraction,
            "weighted_fraction": result.weighted_fraction}))
    return result
