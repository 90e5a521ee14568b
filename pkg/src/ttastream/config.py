"""Run configuration: defaults, layered overrides, and range validation.

Precedence is file < environment < command line. Environment variables use
the prefix TTASTREAM_ plus the upper-cased field name (TTASTREAM_GAMMA=3).
Sources for the defaults are noted per field; values marked (chosen) are
artifact decisions, not published settings.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

ENV_PREFIX = "TTASTREAM_"


@dataclass(frozen=True)
class RunConfig:
    adjacent_count: int = 3  # M, committee size (published default)
    svd_rank: int = 64  # n, retained singular vectors (published default)
    cache_size: int = 3  # SZ, per-class capacity (published default)
    gamma: float = 2.0  # consistency penalty (published ablation winner)
    tau: float = 0.01  # softmax temperature (published default)
    delta: float = 0.1  # view filter, normalized entropy (published default)
    tau_merge: float = 0.1  # global-merge gate, normalized entropy (chosen: reuse 0.1)
    lambda1: float = 0.3  # surrogate weight (published default)
    lambda2: float = 0.02  # alignment weight (published default)
    eta: float = 0.4  # fusion weight (chosen: midpoint of published [0.2, 0.6])
    alpha: float = 1.0  # cache logit scale (dataset-specific; synthetic default)
    beta: float = 5.0  # cache logit sharpness (dataset-specific; synthetic default)
    lr: float = 5e-4  # optimizer learning rate (published default)
    weight_decay: float = 0.1  # decoupled weight decay (published default)
    opt_eps: float = 1e-3  # optimizer epsilon (published default)
    beta1: float = 0.9  # first-moment decay (chosen: standard)
    beta2: float = 0.999  # second-moment decay (chosen: standard)
    seed: int = 0
    cer_enabled: bool = True
    ddc_enabled: bool = True
    cache_enabled: bool = True
    purity_every: int = 50  # cache-purity sampling cadence, in records

    def validate(self) -> "RunConfig":
        checks: list[tuple[str, bool, str]] = [
            ("adjacent_count", self.adjacent_count >= 1, ">= 1"),
            ("svd_rank", self.svd_rank >= 1, ">= 1"),
            ("cache_size", self.cache_size >= 1, ">= 1"),
            ("gamma", self.gamma >= 1.0, ">= 1"),
            ("tau", self.tau > 0.0, "> 0"),
            ("delta", 0.0 <= self.delta <= 1.0, "in [0, 1]"),
            ("tau_merge", 0.0 <= self.tau_merge <= 1.0, "in [0, 1]"),
            ("lambda1", self.lambda1 >= 0.0, ">= 0"),
            ("lambda2", self.lambda2 >= 0.0, ">= 0"),
            ("eta", self.eta >= 0.0, ">= 0"),
            ("alpha", self.alpha > 0.0, "> 0"),
            ("beta", self.beta > 0.0, "> 0"),
            ("lr", self.lr > 0.0, "> 0"),
            ("weight_decay", self.weight_decay >= 0.0, ">= 0"),
            ("opt_eps", self.opt_eps > 0.0, "> 0"),
            ("beta1", 0.0 <= self.beta1 < 1.0, "in [0, 1)"),
            ("beta2", 0.0 <= self.beta2 < 1.0, "in [0, 1)"),
            ("purity_every", self.purity_every >= 1, ">= 1"),
        ]
        for key, ok, rule in checks:
            if not ok:
                raise ConfigError(key, f"{getattr(self, key)!r} violates {rule}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw) -> object:
    """Parse a raw override (string or JSON value) to the field's type."""
    if key not in _FIELD_TYPES:
        raise ConfigError(key, "unknown configuration key")
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from exc
    raise ConfigError(key, f"unhandled field type {kind}")


def load_config(
    path: str | Path | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    """Resolve the configuration with file < environment < explicit overrides."""
    values: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("<file>", "config file must hold a JSON object")
        for key, val in raw.items():
            values[key] = _coerce(key, val)
    env = os.environ if env is None else env
    for name in _FIELD_TYPES:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = _coerce(name, env[env_key])
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = _coerce(key, val)
    return RunConfig(**values).validate()
