"""
Weighted log-rank statistics.

All three weight schemes are expressed through the modest weight
``w_j = 1 / max(S(t_j-), S(t*))`` computed from the pooled Kaplan-Meier curve:
the standard log-rank test is the special case ``t* = 0``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from gswlr.counting import KmCurve, RiskTable, build_risk_table, km_pooled
from gswlr.errors import DegenerateVarianceError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModestWeight:
    t_star: float

    def __post_init__(self):
        if not (self.t_star >= 0 and math.isfinite(self.t_star)):
            raise DomainError("t* must be a finite number >= 0")

    @property
    def name(self):
        return "modest(%g)" % self.t_star


@dataclass(frozen=True)
class FlemingHarrington01:
    name = "fh01"


@dataclass(frozen=True)
class LogRank:
    name = "logrank"


WeightScheme = Union[ModestWeight, FlemingHarrington01, LogRank]


def parse_scheme(name: str, t_star: Optional[float] = None) -> WeightScheme:
    name = name.lower().replace("-", "").replace("_", "")
    if name in ("logrank", "lr"):
        return LogRank()
    if name in ("fh01", "flemingharrington01"):
        return FlemingHarrington01()
    if name == "modest":
        if t_star is None:
            raise DomainError("The modest weight needs t*")
        return ModestWeight(float(t_star))
    raise DomainError("Unknown weight scheme: %s" % name)


@dataclass(frozen=True)
class WlrResult:
    u: float
    v: float
    z: float
    weights: np.ndarray
    n_events: int


def compute_weights(table: RiskTable, km: KmCurve, scheme: WeightScheme) -> np.ndarray:
    if isinstance(scheme, LogRank):
        return np.ones(len(table))

    left = np.asarray(km.left_limit(table.times), dtype=float)
    if isinstance(scheme, FlemingHarrington01):
        return 1.0 - left
    if isinstance(scheme, ModestWeight):
        # S(t*) is the step value at t*, not interpolated
        floor = km.at(scheme.t_star)
        return 1.0 / np.maximum(left, floor)
    raise DomainError("Unsupported weight scheme: %r" % (scheme,))


def weighted_logrank(table: RiskTable, weights) -> WlrResult:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != table.times.shape:
        raise DomainError("Weights must align with the risk table rows")

    n0 = table.n0.astype(float)
    n1 = table.n1.astype(float)
    n = n0 + n1
    o = (table.o0 + table.o1).astype(float)

    u = float(np.sum(weights * (table.o1 - o * n1 / n)))

    denom = n * n * (n - 1.0)
    var_terms = np.divide(
        n0 * n1 * o * (n - o), denom, out=np.zeros_like(n), where=n > 1
    )
    v = float(np.sum(weights * weights * var_terms))
    if not v > 0:
        raise DegenerateVarianceError("Degenerate variance: V = %g" % v)

    return WlrResult(u=u, v=v, z=u / math.sqrt(v), weights=weights, n_events=int(o.sum()))


def wlr_test(cohort, scheme: WeightScheme) -> WlrResult:
    """Risk table, pooled KM and weighted log-rank statistic for one data cut."""
    table = build_risk_table(cohort)
    km = km_pooled(table, len(cohort))
    return weighted_logrank(table, compute_weights(table, km, scheme))
