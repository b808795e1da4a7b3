"""Seeded synthetic generators with known potential outcomes.

Random numbers come from numpy's PCG64. Every column draws from its own
child stream, keyed by ``SeedSequence(seed, spawn_key=...)``, so adding
columns never shifts the draws of earlier ones. Normals are produced by
pushing PCG64 uniforms through the inverse normal CDF (``ndtri``), which
keeps bundles bit-identical across platforms and numpy versions that keep
PCG64 and ``Generator.random`` stable.

Covariates are snapped to multiples of 2**-36 and outcomes to multiples of
2**-37. On that grid ``y0 + effect`` is computed without rounding, so
``y1 - y0`` reproduces the effect exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np
from scipy.special import expit, ndtri

from .config import parse_kv
from .data import DatasetBundle, validate_bundle

# stream keys; covariate j uses (0, j)
_COV, _TREAT_NOISE, _ASSIGN, _OUTCOME_NOISE = 0, 1, 2, 3

LINEAR_OUTCOME_SIGNS = np.array([1.0, 1.0, -1.0, 1.0, -1.0, 1.0])


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def _uniform(seed, n, *key):
    u = _stream(seed, *key).random(n)
    u[u == 0.0] = 2.0 ** -54
    return u


def _normal(seed, n, sd, *key):
    return sd * ndtri(_uniform(seed, n, *key))


def _grid(a, bits):
    scale = 2.0 ** bits
    return np.rint(np.asarray(a, dtype=float) * scale) / scale


def _covariates(seed, n, k):
    return _grid(np.column_stack([ndtri(_uniform(seed, n, _COV, j)) for j in range(k)]), 36)


def _assemble(x, e, y0, y1, seed, **extra):
    t = (_uniform(seed, x.shape[0], _ASSIGN) < e).astype(np.int64)
    yf = np.where(t == 1, y1, y0)
    return validate_bundle(DatasetBundle(
        covariates=x, treatment=t, outcome_factual=yf, outcome_y0=y0, outcome_y1=y1,
        true_propensity=e, **extra), require_both_arms=False)


@dataclass(frozen=True)
class LinearGenConfig:
    bias_weights: tuple = (0.5, 0.5, 0.5, 0.5, 0.5, 0.5)
    n: int = 1500
    k: int = 6
    treatment_noise_sd: float = 0.08
    outcome_noise_sd: float = 0.1
    effect_c: float = 2.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bias_weights", tuple(float(v) for v in self.bias_weights))
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.k != 6 or len(self.bias_weights) != 6:
            raise ValueError("the linear design has exactly six covariates")
        if self.treatment_noise_sd < 0 or self.outcome_noise_sd < 0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class NonlinearGenConfig:
    n: int = 1500
    alpha: float = 3.0
    beta: float = 1.0
    gamma: float = 0.5
    propensity_noise_sd: float = 0.05
    outcome_noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.propensity_noise_sd < 0 or self.outcome_noise_sd < 0:
            raise ValueError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class RoleGenConfig:
    n: int = 2000
    n_instrumental: int = 2
    n_confounder: int = 2
    n_adjustment: int = 2
    n_noise: int = 0
    treatment_scale: float = 1.0
    outcome_scale: float = 1.0
    effect_c: float = 2.0
    treatment_noise_sd: float = 0.08
    outcome_noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if min(self.n_instrumental, self.n_confounder, self.n_adjustment) < 1 or self.n_noise < 0:
            raise ValueError("each role needs at least one feature")

    @property
    def roles(self) -> tuple[str, ...]:
        return (("instrumental",) * self.n_instrumental + ("confounder",) * self.n_confounder
                + ("adjustment",) * self.n_adjustment + ("noise",) * self.n_noise)


# ---------------------------------------------------------------------------
# mechanisms, exposed so tests can probe them on hand-built inputs
# ---------------------------------------------------------------------------

def linear_logit(x, bias_weights, noise=0.0):
    return np.asarray(x) @ np.asarray(bias_weights, dtype=float) + noise


def linear_y0(x, bias_weights, noise=0.0):
    return np.asarray(x) @ (np.asarray(bias_weights, dtype=float) * LINEAR_OUTCOME_SIGNS) + noise


def nonlinear_logit(x, config: NonlinearGenConfig, noise=0.0):
    x = np.asarray(x, dtype=float)
    return config.alpha * np.tanh(x[:, 0]) + config.beta * x[:, 1] ** 2 - config.gamma * x[:, 2] + noise


def nonlinear_y0(x, noise=0.0):
    x = np.asarray(x, dtype=float)
    return 1.5 * x[:, 0] + np.sin(x[:, 1]) - 0.8 * x[:, 2] + 0.5 * x[:, 3] + noise


def nonlinear_effect(x):
    return 2.0 + 0.5 * np.asarray(x, dtype=float)[:, 4]


def _role_mask(config: RoleGenConfig, *wanted):
    return np.array([r in wanted for r in config.roles])


def role_logit(x, config: RoleGenConfig, noise=0.0):
    mask = _role_mask(config, "instrumental", "confounder")
    return config.treatment_scale * np.asarray(x, dtype=float)[:, mask].sum(axis=1) + noise


def role_y0(x, config: RoleGenConfig, noise=0.0):
    mask = _role_mask(config, "confounder", "adjustment")
    return config.outcome_scale * np.asarray(x, dtype=float)[:, mask].sum(axis=1) + noise


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def generate_linear(config: LinearGenConfig = LinearGenConfig()) -> DatasetBundle:
    """Logistic selection on six normal covariates, constant effect ``c``."""
    n, s = config.n, config.seed
    x = _covariates(s, n, 6)
    e = expit(linear_logit(x, config.bias_weights, _normal(s, n, config.treatment_noise_sd, _TREAT_NOISE)))
    y0 = _grid(linear_y0(x, config.bias_weights, _normal(s, n, config.outcome_noise_sd, _OUTCOME_NOISE)), 37)
    y1 = y0 + _grid(config.effect_c, 37)
    return _assemble(x, e, y0, y1, s, metadata={"generator": "linear", **asdict(config)})


def generate_nonlinear(config: NonlinearGenConfig = NonlinearGenConfig()) -> DatasetBundle:
    """Non-linear selection and outcome, effect ``2 + 0.5 * x5`` per row."""
    n, s = config.n, config.seed
    x = _covariates(s, n, 6)
    e = expit(nonlinear_logit(x, config, _normal(s, n, config.propensity_noise_sd, _TREAT_NOISE)))
    y0 = _grid(nonlinear_y0(x, _normal(s, n, config.outcome_noise_sd, _OUTCOME_NOISE)), 37)
    y1 = y0 + nonlinear_effect(x)
    return _assemble(x, e, y0, y1, s, metadata={"generator": "nonlinear", **asdict(config)})


def generate_roles(config: RoleGenConfig = RoleGenConfig()) -> DatasetBundle:
    """Covariates with fixed roles.

    Instrumental columns drive treatment only, confounders drive treatment
    and outcome, adjustment columns drive the outcome only, noise columns
    drive nothing.
    """
    n, s = config.n, config.seed
    roles = config.roles
    x = _covariates(s, n, len(roles))
    e = expit(role_logit(x, config, _normal(s, n, config.treatment_noise_sd, _TREAT_NOISE)))
    y0 = _grid(role_y0(x, config, _normal(s, n, config.outcome_noise_sd, _OUTCOME_NOISE)), 37)
    y1 = y0 + _grid(config.effect_c, 37)
    prefix = {"instrumental": "i", "confounder": "c", "adjustment": "a", "noise": "n"}
    counters: dict[str, int] = {}
    names = []
    for r in roles:
        counters[r] = counters.get(r, 0) + 1
        names.append(f"{prefix[r]}{counters[r]}")
    return _assemble(x, e, y0, y1, s, feature_names=tuple(names), feature_roles=roles,
                     metadata={"generator": "roles", **asdict(config)})


# ---------------------------------------------------------------------------
# frozen presets
# ---------------------------------------------------------------------------

def _load_preset(name: str) -> dict:
    text = resources.files("dfw").joinpath("presets", f"{name}.cfg").read_text()
    return parse_kv(text)


def _coerce(cls, values: dict):
    out = {}
    for f in fields(cls):
        if f.name not in values:
            continue
        v = values[f.name]
        if f.name == "bias_weights":
            out[f.name] = tuple(float(s) for s in str(v).split(","))
        elif f.type in ("int", int):
            out[f.name] = int(v)
        else:
            out[f.name] = float(v)
    return cls(**out)


def bias_presets() -> dict[str, LinearGenConfig]:
    """The low / moderate / high selection-bias settings of the linear design."""
    return {level: _coerce(LinearGenConfig, _load_preset(f"linear_{level}"))
            for level in ("low", "moderate", "high")}


def nonlinear_presets() -> dict[str, NonlinearGenConfig]:
    """Non-linear design with the selection coefficients scaled 1x / 2x / 3x."""
    return {level: _coerce(NonlinearGenConfig, _load_preset(f"nonlinear_{level}"))
            for level in ("low", "moderate", "high")}
