"""Analysis and sweep configuration."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Invalid analysis or sweep configuration."""


class RegimeWarning(UserWarning):
    """Parameters outside the range where the stability statements apply."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Hypothesis parameters and solver settings for one analysis.

    ``normalized`` selects the probability measure ``dv / Vol`` for the
    deviation norms; the norms inside ``k_{p,r}`` and the pinching deficit
    are always taken against plain ``dv``.
    """

    n: int = 2
    p: float = 2.0
    q: float = 2.0
    r: int = 2
    tol: float = 1e-10
    max_iter: int = 500
    normalized: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n != 2:
            raise ConfigError(f"mesh analysis supports n = 2 only, got n = {self.n}")
        if not self.p >= 2:
            raise ConfigError(f"p must be >= 2, got {self.p}")
        # q < 1 is accepted (quasi-norm) so that q <= n/2 runs can still be
        # explored; check_regime() warns about them.
        if not self.q > 0:
            raise ConfigError(f"q must be positive, got {self.q}")
        if not 1 <= self.r <= self.n:
            raise ConfigError(f"r must lie in 1..{self.n}, got {self.r}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")

    def check_regime(self):
        """Warn when ``q <= n/2`` (the Ricci lower bound needs ``q > n/2``)."""
        if self.q <= self.n / 2:
            msg = (
                f"q <= n/2 (q = {self.q:g}, n = {self.n}): outside the q > n/2 regime "
                "of the Ricci-curvature eigenvalue lower bound; results still computed"
            )
            warnings.warn(msg, RegimeWarning, stacklevel=2)
            return msg
        return None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def updated(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass(frozen=True)
class SweepSpec:
    """One analysis per value of ``param`` on a fixed shape family.

    ``param`` is either a shape parameter (e.g. ``delta``) or
    ``resolution``.
    """

    kind: str
    params: dict
    resolution: int
    param: str
    values: tuple
    config: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ConfigError("a sweep needs at least two values")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"sweep values must be strictly increasing, got {list(vals)}")
        object.__setattr__(self, "values", vals)


def load_config_file(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data
