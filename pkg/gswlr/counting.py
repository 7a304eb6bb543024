"""
Subject records, administrative censoring, risk tables and Kaplan-Meier curves.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, NamedTuple, Optional

import numpy as np

from gswlr.errors import DataError, DomainError, NoEventsError

logger = logging.getLogger(__name__)


class SubjectRecord(NamedTuple):
    arrival: float
    event_time: float
    observed_event: bool
    arm: int


@dataclass(frozen=True)
class Cohort:
    """Column-wise subject records.

    ``time`` is measured from entry: the event time, or the censoring time when
    ``event`` is false. ``arrival`` is the calendar entry time.
    """

    arrival: np.ndarray
    time: np.ndarray
    event: np.ndarray
    arm: np.ndarray

    def __post_init__(self):
        arrival = np.asarray(self.arrival, dtype=float)
        time = np.asarray(self.time, dtype=float)
        event = np.asarray(self.event, dtype=bool)
        arm = np.asarray(self.arm, dtype=np.int8)
        if not (arrival.shape == time.shape == event.shape == arm.shape) or time.ndim != 1:
            raise DataError("Cohort columns must be 1-d arrays of equal length")
        if np.any(time <= 0):
            raise DataError("Follow-up times must be > 0")
        if np.any(arrival < 0):
            raise DataError("Arrival times must be >= 0")
        if np.any((arm != 0) & (arm != 1)):
            raise DataError("Arm must be 0 or 1")
        object.__setattr__(self, "arrival", arrival)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "arm", arm)

    def __len__(self):
        return len(self.time)

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord]):
        records = list(records)
        return cls(
            arrival=[r.arrival for r in records],
            time=[r.event_time for r in records],
            event=[r.observed_event for r in records],
            arm=[r.arm for r in records],
        )

    @classmethod
    def from_followup(cls, time, event, arm):
        """Snapshot data without calendar information (everyone enters at 0)."""
        time = np.asarray(time, dtype=float)
        return cls(np.zeros_like(time), time, event, arm)

    def select_arm(self, arm):
        keep = self.arm == arm
        return Cohort(self.arrival[keep], self.time[keep], self.event[keep], self.arm[keep])

    @property
    def n_events(self):
        return int(self.event.sum())


def apply_cutoff(cohort: Cohort, cutoff: float) -> Cohort:
    """Administratively censor everyone at calendar time ``cutoff``."""
    if cutoff < 0:
        raise DomainError("Cutoff must be >= 0")

    keep = cohort.arrival < cutoff
    arrival = cohort.arrival[keep]
    time = cohort.time[keep]
    # compare on the calendar scale so the event that defines a cutoff is kept
    within = arrival + time <= cutoff
    followup = np.where(within, time, cutoff - arrival)
    event = cohort.event[keep] & within
    return Cohort(arrival, followup, event, cohort.arm[keep])


class EventCutoff(NamedTuple):
    time: float
    n_events: int
    sufficient: bool


def cutoff_for_event_count(cohort: Cohort, d: int) -> EventCutoff:
    """Calendar time at which the d-th event occurs.

    When fewer than ``d`` events ever occur the calendar time of the last
    event is returned with ``sufficient`` set to False (``nan`` without any
    events).
    """
    if d < 1:
        raise DomainError("Event count must be >= 1")

    calendar = np.sort(cohort.arrival[cohort.event] + cohort.time[cohort.event])
    if len(calendar) >= d:
        return EventCutoff(float(calendar[d - 1]), d, True)
    if len(calendar) == 0:
        return EventCutoff(float("nan"), 0, False)
    return EventCutoff(float(calendar[-1]), len(calendar), False)


@dataclass(frozen=True)
class RiskTable:
    """One row per distinct event time with per-arm at-risk and event counts."""

    times: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    o0: np.ndarray
    o1: np.ndarray
    n_subjects: int
    max_followup: float

    @property
    def n(self):
        return self.n0 + self.n1

    @property
    def o(self):
        return self.o0 + self.o1

    def __len__(self):
        return len(self.times)

    def swap_arms(self):
        return RiskTable(self.times, self.n1, self.n0, self.o1, self.o0,
                         self.n_subjects, self.max_followup)


def _counts_at(sorted_values, points):
    """(#values >= point, #values == point) for each point."""
    left = np.searchsorted(sorted_values, points, side="left")
    right = np.searchsorted(sorted_values, points, side="right")
    return len(sorted_values) - left, right - left


def build_risk_table(cohort: Cohort) -> RiskTable:
    if cohort.n_events == 0:
        raise NoEventsError("No events: cannot build a risk table")

    times = np.unique(cohort.time[cohort.event])
    at_risk = []
    events = []
    for arm in (0, 1):
        in_arm = cohort.arm == arm
        n, _ = _counts_at(np.sort(cohort.time[in_arm]), times)
        _, o = _counts_at(np.sort(cohort.time[in_arm & cohort.event]), times)
        at_risk.append(n)
        events.append(o)

    return RiskTable(
        times=times,
        n0=at_risk[0],
        n1=at_risk[1],
        o0=events[0],
        o1=events[1],
        n_subjects=len(cohort),
        max_followup=float(cohort.time.max()),
    )


@dataclass(frozen=True)
class KmCurve:
    """Right-continuous Kaplan-Meier step function.

    ``times[0]`` is 0 with survival 1; later entries are event times.
    """

    times: np.ndarray
    survival: np.ndarray
    n_at_risk: np.ndarray
    n_events: np.ndarray
    max_followup: float

    def at(self, t):
        """Step value S(t), including a drop at t."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        s = self.survival[np.maximum(idx, 0)]
        return float(s) if s.ndim == 0 else s

    def left_limit(self, t):
        """S(t-), excluding a drop at t."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left") - 1
        s = self.survival[np.maximum(idx, 0)]
        return float(s) if s.ndim == 0 else s

    def steps(self):
        return list(zip(self.times.tolist(), self.survival.tolist()))


def _product_limit(times, n, o, n_start, max_followup):
    surv = np.cumprod(1.0 - o / n)
    return KmCurve(
        times=np.concatenate(([0.0], times)),
        survival=np.concatenate(([1.0], surv)),
        n_at_risk=np.concatenate(([n_start], n)).astype(int),
        n_events=np.concatenate(([0], o)).astype(int),
        max_followup=max_followup,
    )


def km_pooled(table: RiskTable, n_total_at_start: Optional[int] = None) -> KmCurve:
    if n_total_at_start is None:
        n_total_at_start = table.n_subjects
    return _product_limit(table.times, table.n, table.o, n_total_at_start, table.max_followup)


def km_arm(cohort: Cohort) -> KmCurve:
    """Product-limit estimate for a single group of subjects."""
    if len(cohort) == 0:
        raise DataError("Cannot estimate survival for an empty arm")

    ordered = np.sort(cohort.time)
    times = np.unique(cohort.time[cohort.event])
    n, _ = _counts_at(ordered, times)
    _, o = _counts_at(np.sort(cohort.time[cohort.event]), times)
    return _product_limit(times, n, o, len(cohort), float(ordered[-1]))


def km_per_arm(cohort: Cohort) -> Dict[int, KmCurve]:
    """KM curve for every arm present in the data."""
    arms = sorted(int(a) for a in np.unique(cohort.arm))
    if not arms:
        raise DataError("No subjects")
    return {arm: km_arm(cohort.select_arm(arm)) for arm in arms}
