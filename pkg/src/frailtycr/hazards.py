"""Parametric baseline cause-specific hazards.

Each family has a closed-form cumulative hazard and inverse:

    constant   h(t) = rate                       H(t) = rate * t
    weibull    h(t) = (shape/scale) (t/scale)^(shape-1)
                                                 H(t) = (t/scale)^shape
    gompertz   h(t) = a exp(c t)                 H(t) = (a/c) (exp(c t) - 1)

All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateHazardError, DomainError, ParameterError


def _positive(name: str, value) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class ParametricHazard:
    """Base class; use :class:`Constant`, :class:`Weibull` or :class:`Gompertz`."""

    family = "abstract"

    def hazard(self, t):
        raise NotImplementedError

    def cumulative(self, t):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    def scaled(self, factor: float) -> "ParametricHazard":
        """The same family with hazard multiplied by ``factor``."""
        raise NotImplementedError

    @property
    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}


@dataclass(frozen=True)
class Constant(ParametricHazard):
    rate: float
    family = "constant"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, self.rate)

    def cumulative(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def inverse(self, y):
        return np.asarray(y, dtype=float) / self.rate

    def scaled(self, factor):
        return Constant(self.rate * factor)

    @property
    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Weibull(ParametricHazard):
    shape: float
    scale: float
    family = "weibull"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    def hazard(self, t):
        z = np.asarray(t, dtype=float) / self.scale
        with np.errstate(divide="ignore"):
            return (self.shape / self.scale) * z ** (self.shape - 1.0)

    def cumulative(self, t):
        return (np.asarray(t, dtype=float) / self.scale) ** self.shape

    def inverse(self, y):
        return self.scale * np.asarray(y, dtype=float) ** (1.0 / self.shape)

    def scaled(self, factor):
        # factor * (t/s)^b == (t / (s * factor^(-1/b)))^b
        return Weibull(self.shape, self.scale * factor ** (-1.0 / self.shape))

    @property
    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Gompertz(ParametricHazard):
    a: float
    c: float
    family = "gompertz"

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))
        object.__setattr__(self, "c", _positive("c", self.c))

    def hazard(self, t):
        return self.a * np.exp(self.c * np.asarray(t, dtype=float))

    def cumulative(self, t):
        return (self.a / self.c) * np.expm1(self.c * np.asarray(t, dtype=float))

    def inverse(self, y):
        return np.log1p(self.c * np.asarray(y, dtype=float) / self.a) / self.c

    def scaled(self, factor):
        return Gompertz(self.a * factor, self.c)

    @property
    def params(self):
        return {"a": self.a, "c": self.c}


FAMILIES = {"constant": Constant, "weibull": Weibull, "gompertz": Gompertz}


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("time must be >= 0")
    return t


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def hazard_value(hz: ParametricHazard, t):
    return _scalar_or_array(hz.hazard(_check_time(t)))


def cumulative_hazard(hz: ParametricHazard, t):
    return _scalar_or_array(hz.cumulative(_check_time(t)))


def inverse_cumulative_hazard(hz: ParametricHazard, y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise DomainError("cumulative hazard value must be >= 0")
    return _scalar_or_array(hz.inverse(y))


def _weighted_sum(X, weights):
    # zero weights drop their term even where it overflows
    w = np.asarray(weights, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(w > 0, X * w, 0.0).sum(axis=-1)


@dataclass(frozen=True)
class HazardSet:
    """Baseline cause-specific hazards for individuals 1 and 2."""

    first: tuple
    second: tuple
    _all: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        first, second = tuple(self.first), tuple(self.second)
        for k, group in ((1, first), (2, second)):
            if len(group) < 1:
                raise ParameterError(f"individual {k} needs at least one cause")
            for hz in group:
                if not isinstance(hz, ParametricHazard):
                    raise ParameterError(f"individual {k}: {hz!r} is not a hazard")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        object.__setattr__(self, "_all", (first, second))

    @classmethod
    def of(cls, first: Sequence[ParametricHazard], second: Sequence[ParametricHazard]):
        return cls(tuple(first), tuple(second))

    def causes(self, k: int) -> tuple:
        if k not in (1, 2):
            raise DomainError(f"individual index must be 1 or 2, got {k!r}")
        return self._all[k - 1]

    def n_causes(self, k: int) -> int:
        return len(self.causes(k))

    @property
    def dims(self) -> tuple[int, int]:
        return len(self.first), len(self.second)

    def scaled(self, factor1: float, factor2: float) -> "HazardSet":
        return HazardSet(tuple(h.scaled(factor1) for h in self.first),
                         tuple(h.scaled(factor2) for h in self.second))

    def hazards(self, k: int, t) -> np.ndarray:
        """h_kj(t) stacked on a trailing cause axis."""
        t = np.asarray(t, dtype=float)
        return np.stack([hz.hazard(t) for hz in self.causes(k)], axis=-1)

    def cumulatives(self, k: int, t) -> np.ndarray:
        """H_kj(t) stacked on a trailing cause axis."""
        t = np.asarray(t, dtype=float)
        return np.stack([hz.cumulative(t) for hz in self.causes(k)], axis=-1)

    def total(self, k: int, t, weights=None):
        if weights is None:
            return self.cumulatives(k, t).sum(axis=-1)
        with np.errstate(over="ignore"):
            H = self.cumulatives(k, t)
        return _weighted_sum(H, weights)

    def total_rate(self, k: int, t, weights=None):
        if weights is None:
            return self.hazards(k, t).sum(axis=-1)
        with np.errstate(over="ignore"):
            h = self.hazards(k, t)
        return _weighted_sum(h, weights)

    def common_hazard(self, k: int) -> bool:
        group = self.causes(k)
        return all(hz == group[0] for hz in group[1:])

    def to_list(self) -> list:
        return [[h.to_dict() for h in self.first], [h.to_dict() for h in self.second]]


def total_inverse(hs: HazardSet, k: int, weights, y, rtol: float = 1e-13,
                  max_iter: int = 200):
    """Solve ``sum_j w_j H_kj(t) = y`` for ``t``.

    ``weights`` has a trailing cause axis and broadcasts against ``y``.
    The root is bracketed from the per-cause inverses and polished with a
    safeguarded Newton iteration.
    """
    causes = hs.causes(k)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.shape[-1] != len(causes):
        raise DomainError(f"expected {len(causes)} weights, got {w.shape[-1]}")
    if np.any(w < 0):
        raise DomainError("weights must be non-negative")
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise DomainError("target cumulative hazard must be >= 0")
    if np.any(np.all(w == 0, axis=-1)):
        raise DegenerateHazardError("all cause weights are zero")
    shape = np.broadcast_shapes(y.shape, w.shape[:-1])
    y = np.broadcast_to(y, shape).astype(float)
    w = np.broadcast_to(w, shape + (len(causes),))

    if len(causes) == 1:
        return _scalar_or_array(causes[0].inverse(y / w[..., 0]))

    n = len(causes)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        per_hi = np.stack([np.where(w[..., j] > 0, hz.inverse(y / w[..., j]), np.inf)
                           for j, hz in enumerate(causes)], axis=-1)
        per_lo = np.stack([np.where(w[..., j] > 0, hz.inverse(y / (n * w[..., j])), np.inf)
                           for j, hz in enumerate(causes)], axis=-1)
    hi = per_hi.min(axis=-1)
    lo = per_lo.min(axis=-1)
    t = 0.5 * (lo + hi)
    scale = np.maximum(1.0, y)
    done = y == 0
    t = np.where(done, 0.0, t)
    for _ in range(max_iter):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            resid = hs.total(k, t, w) - y
            ok = (np.abs(resid) <= rtol * scale) | (hi - lo <= 1e-15 * hi) | done
            if np.all(ok):
                break
            lo = np.where(resid < 0, t, lo)
            hi = np.where(resid > 0, t, hi)
            slope = hs.total_rate(k, t, w)
            step = t - resid / slope
            inside = np.isfinite(step) & (step > lo) & (step < hi)
            geo = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * hi)
            mid = np.where(hi / np.maximum(lo, 1e-300) > 4.0, geo, 0.5 * (lo + hi))
            t = np.where(ok, t, np.where(inside, step, mid))
    return _scalar_or_array(t)
