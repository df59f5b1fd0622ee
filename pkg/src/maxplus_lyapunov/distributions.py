"""Service-time distributions."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = ["ServiceDistribution", "parse_distribution"]

_KINDS = ("det", "exp", "unif", "norm")


@dataclass(frozen=True)
class ServiceDistribution:
    """A nonnegative service-time law.

    ``kind`` is one of ``det(value)``, ``exp(rate)``, ``unif(lo, hi)`` or
    ``norm(mean, sd)``; normal laws are truncated at zero by rejection unless
    ``truncated`` is False.
    """

    kind: str
    params: tuple[float, ...]
    truncated: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        need = {"det": 1, "exp": 1, "unif": 2, "norm": 2}[self.kind]
        if len(params) != need:
            raise ValueError(f"{self.kind} takes {need} parameter(s), got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise ValueError("distribution parameters must be finite")
        if self.kind == "exp" and params[0] <= 0:
            raise ValueError("exponential rate must be positive")
        if self.kind == "unif" and not params[0] <= params[1]:
            raise ValueError("uniform bounds must satisfy lo <= hi")
        if self.kind == "norm" and params[1] < 0:
            raise ValueError("normal standard deviation must be nonnegative")

    @classmethod
    def deterministic(cls, value: float) -> "ServiceDistribution":
        return cls("det", (value,))

    @classmethod
    def exponential(cls, rate: float) -> "ServiceDistribution":
        return cls("exp", (rate,))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "ServiceDistribution":
        return cls("unif", (lo, hi))

    @classmethod
    def normal(cls, mean: float, sd: float, truncated: bool = True) -> "ServiceDistribution":
        return cls("norm", (mean, sd), truncated)

    @property
    def is_deterministic(self) -> bool:
        return self.kind == "det" or (self.kind == "unif" and self.params[0] == self.params[1]) or (
            self.kind == "norm" and self.params[1] == 0 and (self.params[0] >= 0 or not self.truncated))

    def is_nonnegative(self) -> bool:
        if self.kind == "det":
            return self.params[0] >= 0
        if self.kind == "unif":
            return self.params[0] >= 0
        if self.kind == "norm":
            return self.truncated or (self.params[1] == 0 and self.params[0] >= 0)
        return True

    def mean(self) -> float:
        k, p = self.kind, self.params
        if k == "det":
            return p[0]
        if k == "exp":
            return 1.0 / p[0]
        if k == "unif":
            return 0.5 * (p[0] + p[1])
        mu, sd = p
        if not self.truncated:
            return mu
        if sd == 0:
            if mu < 0:
                raise ValueError("normal law with sd=0 and negative mean has no nonnegative part")
            return mu
        a = -mu / sd
        return float(stats.truncnorm.mean(a, np.inf, loc=mu, scale=sd))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "det":
            return np.full(size, p[0])
        if k == "exp":
            return rng.exponential(1.0 / p[0], size)
        if k == "unif":
            return rng.uniform(p[0], p[1], size)
        mu, sd = p
        if not self.truncated or sd == 0:
            return rng.normal(mu, sd, size)
        if stats.norm.sf(-mu / sd) < 1e-3:
            raise ValueError("truncated normal with almost no mass above zero; rejection would stall")
        out = np.empty(size)
        filled = 0
        while filled < size:
            draw = rng.normal(mu, sd, 2 * (size - filled) + 16)
            draw = draw[draw >= 0.0][: size - filled]
            out[filled: filled + draw.size] = draw
            filled += draw.size
        return out

    def __str__(self) -> str:
        return f"{self.kind}({', '.join(_fmt(p) for p in self.params)})"


def _fmt(x: float) -> str:
    return repr(int(x)) if x.is_integer() else repr(x)


_LITERAL = re.compile(r"^\s*([a-z]+)\s*\(([^)]*)\)\s*$")


def parse_distribution(text: str) -> ServiceDistribution:
    """Parse ``det(v)``, ``exp(rate)``, ``unif(lo,hi)`` or ``norm(mean,sd)``."""
    m = _LITERAL.match(text.lower())
    if not m:
        raise ValueError(f"cannot parse distribution literal {text!r}")
    kind = m.group(1)
    aliases = {"deterministic": "det", "const": "det", "exponential": "exp",
               "uniform": "unif", "normal": "norm"}
    kind = aliases.get(kind, kind)
    args = [a for a in (s.strip() for s in m.group(2).split(",")) if a]
    try:
        params = tuple(float(a) for a in args)
    except ValueError as exc:
        raise ValueError(f"bad parameters in {text!r}") from exc
    return ServiceDistribution(kind, params)
