"""
Treatment-effect summaries reported when a trial stops.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from gswlr.counting import Cohort, KmCurve, km_per_arm
from gswlr.errors import BeyondFollowUpError, DomainError
from gswlr.survival_models import CONTROL, EXPERIMENTAL
from gswlr.wlrt import WlrResult


def _check_tau(km: KmCurve, tau: float):
    if tau < 0:
        raise DomainError("tau must be >= 0")
    if tau > km.max_followup:
        raise BeyondFollowUpError("tau=%g is beyond the last follow-up time %g" % (tau, km.max_followup))


def milestone(km: KmCurve, tau: float) -> float:
    _check_tau(km, tau)
    return km.at(tau)


def km_median(km: KmCurve) -> Optional[float]:
    """First time the curve drops to 0.5 or below; None if it never does."""
    below = np.nonzero(km.survival <= 0.5)[0]
    if len(below) == 0:
        return None
    return float(km.times[below[0]])


def rmst(km: KmCurve, tau: float) -> float:
    """Area under the step function on [0, tau]."""
    _check_tau(km, tau)
    knots = np.append(km.times[km.times < tau], tau)
    return float(np.sum(np.diff(knots) * km.survival[:len(knots) - 1]))


@dataclass(frozen=True)
class ArmSummary:
    milestone_time: float
    milestone: Optional[float]
    median: Optional[float]
    rmst_tau: float
    rmst: Optional[float]
    n_subjects: int
    n_events: int


def summarize_arm(km: KmCurve, milestone_time: float, rmst_tau: float) -> ArmSummary:
    def guarded(fn, tau):
        try:
            return fn(km, tau)
        except BeyondFollowUpError:
            return None

    return ArmSummary(
        milestone_time=milestone_time,
        milestone=guarded(milestone, milestone_time),
        median=km_median(km),
        rmst_tau=rmst_tau,
        rmst=guarded(rmst, rmst_tau),
        n_subjects=int(km.n_at_risk[0]),
        n_events=int(km.n_events.sum()),
    )


def _difference(a, b):
    return None if a is None or b is None else a - b


@dataclass(frozen=True)
class SummaryReport:
    arms: Dict[int, ArmSummary]
    wlr: Optional[WlrResult] = None
    stagewise_p: Optional[float] = None

    def difference(self, attr):
        """Experimental minus control, None when either side is unavailable."""
        if CONTROL not in self.arms or EXPERIMENTAL not in self.arms:
            return None
        return _difference(getattr(self.arms[EXPERIMENTAL], attr), getattr(self.arms[CONTROL], attr))

    def to_dict(self):
        d = {
            "arms": {str(k): vars(v).copy() for k, v in sorted(self.arms.items())},
            "differences": {
                "milestone": self.difference("milestone"),
                "median": self.difference("median"),
                "rmst": self.difference("rmst"),
            },
            "stagewise_p": self.stagewise_p,
        }
        if self.wlr is not None:
            d["wlr"] = {"u": self.wlr.u, "v": self.wlr.v, "z": self.wlr.z, "n_events": self.wlr.n_events}
        return d


def summary_report(cohort: Cohort, milestone_time: float, rmst_tau: float,
                   wlr: Optional[WlrResult] = None, stagewise_p: Optional[float] = None) -> SummaryReport:
    if not (math.isfinite(milestone_time) and math.isfinite(rmst_tau)):
        raise DomainError("Summary horizons must be finite")
    curves = km_per_arm(cohort)
    arms = {arm: summarize_arm(km, milestone_time, rmst_tau) for arm, km in curves.items()}
    return SummaryReport(arms, wlr, stagewise_p)
