"""Per-trial random streams and small parametric distributions."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def trial_rng(seed: int, trial_id: int, label: str) -> np.random.Generator:
    """Independent stream keyed by (master seed, trial, label).

    Toggling one damage source or feedback never shifts another's draws
    because every consumer owns its own label.
    """
    key = [int(seed) & 0xFFFFFFFF, int(seed) >> 32, int(trial_id), zlib.crc32(label.encode())]
    return np.random.default_rng(np.random.SeedSequence(key))


_ARITY = {
    "fixed": 1,
    "uniform": 2,
    "normal": 2,
    "truncnormal": 2,
    "lognormal": 2,
    "triangular": 3,
}


def distribution_problems(fam: str, p: tuple, where: str = "distribution") -> list[str]:
    if fam not in _ARITY:
        return [f"{where}: unknown family {fam!r} (known: {sorted(_ARITY)})"]
    if len(p) != _ARITY[fam]:
        return [f"{where}: {fam} takes {_ARITY[fam]} params, got {len(p)}"]
    if not all(np.isfinite(v) for v in p):
        return [f"{where}: params must be finite"]
    if fam == "uniform" and not p[0] <= p[1]:
        return [f"{where}: uniform needs low <= high"]
    if fam in ("normal", "truncnormal", "lognormal") and p[1] < 0:
        return [f"{where}: {fam} spread must be >= 0"]
    if fam == "lognormal" and p[0] <= 0:
        return [f"{where}: lognormal median must be > 0"]
    if fam == "truncnormal" and p[0] < -4.0 * p[1]:
        return [f"{where}: truncnormal mean is too far below zero for its sd"]
    if fam == "triangular" and not p[0] <= p[1] <= p[2]:
        return [f"{where}: triangular needs low <= mode <= high"]
    if fam == "triangular" and p[0] == p[2]:
        return [f"{where}: triangular needs low < high"]
    return []


@dataclass(frozen=True)
class Distribution:
    """A (family, params) pair.

    truncnormal is a normal(mean, sd) truncated below at zero, sampled by
    rejection. lognormal params are (median, sigma of log).
    """

    family: str
    params: tuple

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self, where: str = "distribution") -> list[str]:
        return distribution_problems(self.family, self.params, where)

    def sample(self, rng: np.random.Generator) -> float:
        fam, p = self.family, self.params
        if fam == "fixed":
            return float(p[0])
        if fam == "uniform":
            return float(rng.uniform(p[0], p[1]))
        if fam == "normal":
            return float(rng.normal(p[0], p[1]))
        if fam == "lognormal":
            return float(p[0] * np.exp(p[1] * rng.standard_normal()))
        if fam == "triangular":
            return float(rng.triangular(p[0], p[1], p[2]))
        # truncnormal
        if p[1] == 0:
            return float(p[0])
        while True:
            x = rng.normal(p[0], p[1])
            if x >= 0.0:
                return float(x)

    def mean(self) -> float:
        fam, p = self.family, self.params
        if fam == "fixed":
            return float(p[0])
        if fam == "uniform":
            return 0.5 * (p[0] + p[1])
        if fam == "normal":
            return float(p[0])
        if fam == "lognormal":
            return float(p[0] * np.exp(0.5 * p[1] ** 2))
        if fam == "triangular":
            return sum(p) / 3.0
        raise NotImplementedError("mean of truncnormal is not needed")

    def to_dict(self) -> dict:
        return {"family": self.family, "params": list(self.params)}

    @classmethod
    def from_obj(cls, obj, where: str = "distribution") -> "Distribution":
        """Accept {family=..., params=[...]} tables or a bare number (fixed)."""
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return cls("fixed", (float(obj),))
        if not isinstance(obj, dict) or set(obj) != {"family", "params"}:
            raise ConfigError(f"{where}: expected a table with keys 'family' and 'params'")
        try:
            params = tuple(float(v) for v in obj["params"])
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: params must be a list of numbers") from None
        problems = distribution_problems(str(obj["family"]), params, where)
        if problems:
            raise ConfigError(problems)
        return cls(str(obj["family"]), params)
