"""
Piecewise-exponential survival and power-law recruitment models.

Time is measured in months throughout. Models are immutable and their
methods accept scalars or numpy arrays.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from gswlr.errors import DomainError

CONTROL = 0
EXPERIMENTAL = 1


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True)
class PiecewiseExponential:
    """Survival distribution with a constant hazard between change points.

    ``rates[i]`` applies on ``[change_points[i-1], change_points[i])``, the
    first segment starting at 0 and the last one open-ended.
    """

    change_points: Tuple[float, ...] = ()
    rates: Tuple[float, ...] = ()

    def __post_init__(self):
        change_points = tuple(float(c) for c in self.change_points)
        rates = tuple(float(r) for r in self.rates)
        if len(rates) != len(change_points) + 1:
            raise DomainError(
                "Expected %s rates for %s change points, got %s"
                % (len(change_points) + 1, len(change_points), len(rates))
            )
        if any(r <= 0 or not math.isfinite(r) for r in rates):
            raise DomainError("Hazard rates must be positive and finite")
        if any(c <= 0 for c in change_points):
            raise DomainError("Change points must be > 0")
        if any(b <= a for a, b in zip(change_points, change_points[1:])):
            raise DomainError("Change points must be strictly increasing")
        object.__setattr__(self, "change_points", change_points)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def exponential(cls, rate):
        return cls((), (rate,))

    @classmethod
    def from_medians(cls, medians: Sequence[float], change_points: Sequence[float] = ()):
        """Segment rates given as the median of the matching exponential."""
        if any(m <= 0 for m in medians):
            raise DomainError("Medians must be > 0")
        return cls(tuple(change_points), tuple(math.log(2) / m for m in medians))

    @property
    def _starts(self):
        return np.concatenate(([0.0], self.change_points))

    @property
    def _widths(self):
        return np.concatenate((np.diff(self._starts), [np.inf]))

    @property
    def _cumhaz_at_starts(self):
        seg = np.asarray(self.rates[:-1]) * np.diff(self._starts)
        return np.concatenate(([0.0], np.cumsum(seg)))

    def cumulative_hazard(self, t):
        t, scalar = _as_array(t)
        if np.any(t < 0):
            raise DomainError("Time must be >= 0")
        exposure = np.clip(t[..., None] - self._starts, 0.0, self._widths)
        h = exposure @ np.asarray(self.rates)
        return float(h) if scalar else h

    def survival(self, t):
        h = self.cumulative_hazard(t)
        return math.exp(-h) if isinstance(h, float) else np.exp(-h)

    def hazard(self, t):
        """Rate of the segment containing ``t`` (right-continuous)."""
        t, scalar = _as_array(t)
        if np.any(t < 0):
            raise DomainError("Time must be >= 0")
        idx = np.searchsorted(self.change_points, t, side="right")
        h = np.asarray(self.rates)[idx]
        return float(h) if scalar else h

    def density(self, t):
        return self.hazard(t) * self.survival(t)

    def quantile(self, u):
        """Smallest t with S(t) <= u, for u in (0, 1]."""
        u, scalar = _as_array(u)
        if np.any(u <= 0) or np.any(u > 1):
            raise DomainError("Survival probability must be in (0, 1]")
        target = -np.log(u)
        cum = self._cumhaz_at_starts
        idx = np.searchsorted(cum, target, side="right") - 1
        t = self._starts[idx] + (target - cum[idx]) / np.asarray(self.rates)[idx]
        return float(t) if scalar else t

    def median(self):
        return self.quantile(0.5)


@dataclass(frozen=True)
class PowerRecruitment:
    """Recruitment with P(R <= r) = (r / duration) ** exponent on [0, duration]."""

    duration: float
    exponent: float = 1.0

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError("Recruitment duration must be > 0")
        if not self.exponent >= 1:
            raise DomainError("Recruitment exponent must be >= 1")

    def cdf(self, r):
        r, scalar = _as_array(r)
        p = np.clip(r / self.duration, 0.0, 1.0) ** self.exponent
        return float(p) if scalar else p

    def quantile(self, u):
        u, scalar = _as_array(u)
        if np.any(u < 0) or np.any(u > 1):
            raise DomainError("Recruitment probability must be in [0, 1]")
        r = self.duration * u ** (1.0 / self.exponent)
        return float(r) if scalar else r


@dataclass(frozen=True)
class ArmModel:
    label: int
    dist: PiecewiseExponential

    def __post_init__(self):
        if self.label not in (CONTROL, EXPERIMENTAL):
            raise DomainError("Arm label must be 0 (control) or 1 (experimental)")
