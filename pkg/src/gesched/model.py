"""Problem parameters, solver configuration, and the flat config-file format.

The plant is a scalar AR(1) source x(t+1) = a x(t) + w(t) with unit-variance
Gaussian noise, estimated remotely over a two-state Markov (good/bad) channel
with delayed acknowledgments. A scheduler pays `lam` per transmission and the
squared estimation error otherwise; costs are discounted by `beta`.

All defaults live here: ModelParams() / SolverConfig() are the reference
configuration used by the CLI when a key is absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

ASSUMPTION_STABILITY = "stability"          # a^2 (1 - p01) < 1
ASSUMPTION_CHANNEL_ORDER = "channel_order"  # p11 >= p01

QUADRATURE_KINDS = ("grid-trapezoid",)


class ParameterError(ValueError):
    """A parameter is outside its admissible range."""


class AssumptionViolation(ValueError):
    """A structural assumption on the model is violated.

    `assumption` is one of the ASSUMPTION_* names, `observed` the offending
    quantity (a^2(1-p01) for stability, p11 - p01 for channel order).
    """

    def __init__(self, assumption: str, observed: float, message: str):
        super().__init__(message)
        self.assumption = assumption
        self.observed = observed


class ConfigError(ValueError):
    """Malformed or unknown entry in a config file."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


@dataclass(frozen=True)
class ModelParams:
    """Source, channel, and cost parameters.

    a      source pole (any real; only a^2 enters the stability condition)
    p01    P(channel good next | bad now), must be in (0, 1]
    p11    P(channel good next | good now), must be in (0, 1]
    lam    transmission cost >= 0
    beta   discount factor in (0, 1)

    allow_unordered_channel=True skips the p11 >= p01 check (the solver still
    runs; the threshold structure is no longer guaranteed).
    """

    a: float = 0.9
    p01: float = 0.3
    p11: float = 0.8
    lam: float = 1.0
    beta: float = 0.9
    allow_unordered_channel: bool = False


def validate(params: ModelParams) -> ModelParams:
    """Check ranges and structural assumptions; returns the params unchanged.

    Idempotent. Raises ParameterError for range violations and
    AssumptionViolation for the two structural assumptions.
    """
    p = params
    if not (0.0 < p.p01 <= 1.0):
        raise ParameterError(f"p01 must be in (0, 1], got {p.p01}")
    if not (0.0 < p.p11 <= 1.0):
        raise ParameterError(f"p11 must be in (0, 1], got {p.p11}")
    if not (0.0 < p.beta < 1.0):
        raise ParameterError(f"beta must be in (0, 1), got {p.beta}")
    if not (p.lam >= 0.0):
        raise ParameterError(f"lam must be >= 0, got {p.lam}")
    if not math.isfinite(p.a):
        raise ParameterError(f"a must be finite, got {p.a}")

    stab = p.a * p.a * (1.0 - p.p01)
    if not (stab < 1.0):
        raise AssumptionViolation(
            ASSUMPTION_STABILITY, stab,
            f"stability requires a^2*(1-p01) < 1, got {stab:.6g} "
            f"(a={p.a}, p01={p.p01})")
    if p.p11 < p.p01 and not p.allow_unordered_channel:
        raise AssumptionViolation(
            ASSUMPTION_CHANNEL_ORDER, p.p11 - p.p01,
            f"channel order requires p11 >= p01, got p11={p.p11} < p01={p.p01} "
            f"(set allow_unordered_channel to override)")
    return p


def stationary_belief(params: ModelParams) -> float:
    """Stationary probability of the good channel state, p01/(1 - p11 + p01)."""
    return params.p01 / (1.0 - params.p11 + params.p01)


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and iteration controls.

    e_max       half-width of the reported error grid
    n_error     grid points on [0, e_max] (folded half-line)
    n_belief    uniform belief points on [0, 1] before distinguished inserts
    pad_sigmas  integration headroom beyond |a|*e_max, in noise std devs;
                keeps one-step kernels from reported states effectively
                untruncated (see grids)
    """

    e_max: float = 10.0
    n_error: int = 401
    n_belief: int = 101
    vi_tolerance: float = 1e-6
    max_iterations: int = 5000
    quadrature: str = "grid-trapezoid"
    pad_sigmas: float = 6.5


def validate_config(config: SolverConfig) -> SolverConfig:
    c = config
    if not (c.e_max > 0.0):
        raise ParameterError(f"e_max must be > 0, got {c.e_max}")
    if not (c.n_error >= 3):
        raise ParameterError(f"n_error must be >= 3, got {c.n_error}")
    if not (c.n_belief >= 2):
        raise ParameterError(f"n_belief must be >= 2, got {c.n_belief}")
    if not (c.vi_tolerance > 0.0):
        raise ParameterError(f"vi_tolerance must be > 0, got {c.vi_tolerance}")
    if not (c.max_iterations >= 1):
        raise ParameterError(f"max_iterations must be >= 1, got {c.max_iterations}")
    if c.quadrature not in QUADRATURE_KINDS:
        raise ParameterError(f"unknown quadrature {c.quadrature!r}, "
                             f"expected one of {QUADRATURE_KINDS}")
    if not (c.pad_sigmas >= 0.0):
        raise ParameterError(f"pad_sigmas must be >= 0, got {c.pad_sigmas}")
    return c


# Config file keys. "lambda" is a keyword, hence the explicit field mapping.
_MODEL_KEYS = {
    "a": ("a", float),
    "p01": ("p01", float),
    "p11": ("p11", float),
    "lambda": ("lam", float),
    "beta": ("beta", float),
    "allow_unordered_channel": ("allow_unordered_channel", bool),
}
_CONFIG_KEYS = {
    "e_max": ("e_max", float),
    "n_error": ("n_error", int),
    "n_belief": ("n_belief", int),
    "vi_tolerance": ("vi_tolerance", float),
    "max_iterations": ("max_iterations", int),
    "quadrature": ("quadrature", str),
    "pad_sigmas": ("pad_sigmas", float),
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> dict:
    """Parse flat `key = value` lines into a raw {key: string} dict.

    Blank lines and `#` comments are ignored. Duplicate or unknown keys are
    errors (with line numbers).
    """
    raw: dict[str, str] = {}
    known = set(_MODEL_KEYS) | set(_CONFIG_KEYS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected `key = value`, got {line.strip()!r}", lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        raw[key] = value
    return raw


def build_from_mapping(raw: dict) -> tuple[ModelParams, SolverConfig]:
    """Turn a raw {config-key: value} mapping into validated params + config.

    Values may be strings (from a file) or already-typed (from CLI flags).
    Missing keys fall back to the dataclass defaults.
    """
    model_kwargs = {}
    config_kwargs = {}
    for key, value in raw.items():
        if key in _MODEL_KEYS:
            field_name, typ = _MODEL_KEYS[key]
            target = model_kwargs
        elif key in _CONFIG_KEYS:
            field_name, typ = _CONFIG_KEYS[key]
            target = config_kwargs
        else:
            raise ConfigError(f"unknown key {key!r}")
        if isinstance(value, str):
            try:
                value = _parse_bool(value) if typ is bool else typ(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from exc
        target[field_name] = value
    params = validate(ModelParams(**model_kwargs))
    config = validate_config(SolverConfig(**config_kwargs))
    return params, config


def load_config(path) -> tuple[ModelParams, SolverConfig]:
    """Read a flat key=value config file; see parse_config_text."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = parse_config_text(fh.read())
    return build_from_mapping(raw)


def config_mapping(params: ModelParams, config: SolverConfig) -> dict:
    """Resolved configuration as the flat config-key mapping (for manifests)."""
    out = {}
    for key, (field_name, _typ) in _MODEL_KEYS.items():
        out[key] = getattr(params, field_name)
    for key, (field_name, _typ) in _CONFIG_KEYS.items():
        out[key] = getattr(config, field_name)
    return out


def _field_names(cls):
    return [f.name for f in fields(cls)]
