"""
Design-stage calculus for weighted log-rank trials.

Expected events, expected score mean and variance are accumulated on a time
grid over follow-up time. A subject recruited at calendar time r is followed
for ``t - r`` months, so the fraction of each arm still under observation at
follow-up time s is the recruitment cdf at ``t - s``.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect
from scipy.stats import norm

from gswlr.default_values import DEFAULT_ARGUMENTS as DEFARGS
from gswlr.errors import DesignError, DomainError
from gswlr.gs_core import FixedSpending, HsdSpending, SpendingRule
from gswlr.integration import GridSettings, boundary_sequence, continuation_probabilities
from gswlr.survival_models import PiecewiseExponential, PowerRecruitment
from gswlr.wlrt import FlemingHarrington01, LogRank, ModestWeight, WeightScheme

logger = logging.getLogger(__name__)

HORIZON_LIMIT = 1200.0


@dataclass(frozen=True)
class PlannedSpending:
    """Spending as declared at design time, before the maximum information is known."""

    kind: str = "hsd"
    gamma: Optional[float] = -4.0
    cum_alphas: Optional[Tuple[float, ...]] = None
    max_info: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("hsd", "fixed"):
            raise DomainError("Spending kind must be 'hsd' or 'fixed'")
        if self.kind == "hsd" and (self.gamma is None or self.gamma == 0):
            raise DomainError("HSD gamma must be non-zero")
        if self.kind == "fixed" and not self.cum_alphas:
            raise DomainError("Fixed spending needs cum_alphas")
        if self.cum_alphas is not None:
            object.__setattr__(self, "cum_alphas", tuple(float(a) for a in self.cum_alphas))

    def rule(self, alpha: float, max_info: Optional[float]) -> SpendingRule:
        max_info = self.max_info if self.max_info is not None else max_info
        if self.kind == "hsd":
            if max_info is None:
                raise DesignError("HSD spending needs max_info")
            return HsdSpending(self.gamma, max_info, alpha)
        return FixedSpending(self.cum_alphas, alpha, max_info)


@dataclass(frozen=True)
class DesignScenario:
    control: PiecewiseExponential
    experimental: PiecewiseExponential
    n_per_arm: int
    recruitment: PowerRecruitment
    scheme: WeightScheme = LogRank()
    calendar_times: Optional[Tuple[float, ...]] = None
    event_counts: Optional[Tuple[float, ...]] = None
    spending: PlannedSpending = PlannedSpending()
    alpha: float = 0.025
    time_step: float = DEFARGS["TIME_STEP"]

    def __post_init__(self):
        if int(self.n_per_arm) != self.n_per_arm or self.n_per_arm < 1:
            raise DomainError("n_per_arm must be a positive integer")
        if not 0 < self.alpha < 0.5:
            raise DomainError("One-sided alpha must lie in (0, 0.5)")
        if (self.calendar_times is None) == (self.event_counts is None):
            raise DomainError("Give exactly one of calendar_times and event_counts")
        schedule = self.calendar_times if self.calendar_times is not None else self.event_counts
        schedule = tuple(float(x) for x in schedule)
        if not schedule or schedule[0] <= 0 or any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise DomainError("Analysis schedule must be positive and strictly increasing")
        if self.calendar_times is not None:
            object.__setattr__(self, "calendar_times", schedule)
        else:
            object.__setattr__(self, "event_counts", schedule)
        if not self.time_step > 0:
            raise DomainError("Time step must be > 0")

    @property
    def n_looks(self):
        return len(self.calendar_times if self.calendar_times is not None else self.event_counts)

    def null(self):
        """Same design with the experimental arm set to the control model."""
        return replace(self, experimental=self.control)


class _Moments:
    """Cell-wise model quantities up to calendar time t."""

    def __init__(self, scenario: DesignScenario, t: float):
        if t < 0:
            raise DomainError("Calendar time must be >= 0")
        n_cells = int(math.ceil(t / scenario.time_step - 1e-9)) if t > 0 else 0
        edges = np.minimum(np.arange(n_cells + 1) * scenario.time_step, t)
        a, b = edges[:-1], edges[1:]

        followed = scenario.recruitment.cdf(t - 0.5 * (a + b))
        s0a, s1a = scenario.control.survival(a), scenario.experimental.survival(a)
        n = scenario.n_per_arm
        self.events0 = n * (s0a - scenario.control.survival(b)) * followed
        self.events1 = n * (s1a - scenario.experimental.survival(b)) * followed
        self.events = self.events0 + self.events1
        self.log_hr = self._log_hazard_ratio(scenario, a, b)
        self.pooled_survival = 0.5 * (s0a + s1a)
        self.weights = self._weights(scenario, t)

    @staticmethod
    def _log_hazard_ratio(scenario, a, b):
        """Log ratio of the cumulative hazards accrued over each cell."""
        if scenario.experimental == scenario.control:
            return np.zeros_like(a)
        h0 = scenario.control.cumulative_hazard(b) - scenario.control.cumulative_hazard(a)
        h1 = scenario.experimental.cumulative_hazard(b) - scenario.experimental.cumulative_hazard(a)
        mid = 0.5 * (a + b)
        tiny = h0 <= 0
        # zero-width cells fall back to the instantaneous rates
        h0 = np.where(tiny, scenario.control.hazard(mid), h0)
        h1 = np.where(tiny, scenario.experimental.hazard(mid), h1)
        return np.log(h1 / h0)

    def _weights(self, scenario, t):
        scheme = scenario.scheme
        if isinstance(scheme, LogRank):
            return np.ones_like(self.pooled_survival)
        if isinstance(scheme, FlemingHarrington01):
            return 1.0 - self.pooled_survival
        if isinstance(scheme, ModestWeight):
            tt = min(scheme.t_star, t)
            floor = 0.5 * (scenario.control.survival(tt) + scenario.experimental.survival(tt))
            return 1.0 / np.maximum(self.pooled_survival, floor)
        raise DomainError("Unsupported weight scheme: %r" % (scheme,))

    @property
    def mean_u(self):
        """Local-alternative mean of the score, 1:1 allocation."""
        return float(np.sum(0.25 * self.weights * self.log_hr * self.events))

    @property
    def info(self):
        """Score variance under the null, 1:1 allocation."""
        return float(np.sum(0.25 * self.weights ** 2 * self.events))


def expected_events(scenario: DesignScenario, t: float) -> Tuple[float, float, float]:
    """(control, experimental, total) expected events at calendar time t."""
    m = _Moments(scenario, t)
    e0, e1 = float(m.events0.sum()), float(m.events1.sum())
    return e0, e1, e0 + e1


def expected_information(scenario: DesignScenario, t: float) -> float:
    return _Moments(scenario, t).info


def drift(scenario: DesignScenario, t: float) -> float:
    m = _Moments(scenario, t)
    info = m.info
    return m.mean_u / math.sqrt(info) if info > 0 else 0.0


def single_look_power(scenario: DesignScenario, t: float) -> float:
    return float(norm.cdf(norm.ppf(scenario.alpha) - drift(scenario, t)))


def events_to_calendar(scenario: DesignScenario, d: float) -> float:
    if d < 0:
        raise DomainError("Event count must be >= 0")
    if d == 0:
        return 0.0

    def excess(t):
        return expected_events(scenario, t)[2] - d

    hi = max(scenario.recruitment.duration, 1.0)
    while excess(hi) < 0:
        if hi >= HORIZON_LIMIT:
            raise DesignError(
                "%g events are not expected within %g months (at most %.1f)"
                % (d, HORIZON_LIMIT, expected_events(scenario, hi)[2])
            )
        hi = min(2.0 * hi, HORIZON_LIMIT)
    return float(bisect(excess, 0.0, hi, xtol=1e-6))


def analysis_times(scenario: DesignScenario) -> List[float]:
    if scenario.calendar_times is not None:
        return list(scenario.calendar_times)
    return [events_to_calendar(scenario, d) for d in scenario.event_counts]


def schoenfeld_events(hazard_ratio: float, alpha: float = 0.025, power: float = 0.9) -> float:
    """Events needed by the standard log-rank test under proportional hazards, 1:1 allocation."""
    if not hazard_ratio > 0 or hazard_ratio == 1:
        raise DomainError("Hazard ratio must be positive and != 1")
    return 4.0 * ((norm.ppf(power) + norm.ppf(1 - alpha)) / math.log(hazard_ratio)) ** 2


@dataclass(frozen=True)
class DesignLook:
    analysis: int
    time: float
    events_control: float
    events_experimental: float
    events: float
    info: float
    mean_u: float
    drift: float
    info_frac: float
    cum_alpha: float
    critical: float
    prob_reject: float
    null_prob_reject: float


@dataclass(frozen=True)
class DesignEvaluation:
    n_per_arm: int
    alpha: float
    looks: Tuple[DesignLook, ...]
    power: float
    expected_duration: float
    null_power: float
    null_expected_duration: float
    max_info: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "max_info", self.looks[-1].info)

    @property
    def stop_probabilities(self):
        """Distribution of the stopping look under the alternative."""
        p = [look.prob_reject for look in self.looks]
        p[-1] += 1.0 - self.power
        return p

    def to_dict(self):
        d = asdict(self)
        for look in d["looks"]:
            if look["critical"] == -np.inf:
                look["critical"] = None
        return d


def planned_boundaries(scenario: DesignScenario, infos: Optional[Sequence[float]] = None,
                       grid: GridSettings = GridSettings()):
    """(cumulative alphas, critical values) from the spending rule applied to the planned information."""
    if infos is None:
        infos = [expected_information(scenario, t) for t in analysis_times(scenario)]
    infos = list(infos)
    if any(b <= a for a, b in zip(infos, infos[1:])) or infos[0] <= 0:
        raise DesignError("Planned information must be positive and increasing: %s" % infos)

    rule = scenario.spending.rule(scenario.alpha, infos[-1])
    k_last = len(infos)
    cum = []
    for k, v in enumerate(infos, start=1):
        c = scenario.alpha if k == k_last else min(scenario.alpha, rule.cum_alpha(k, v))
        cum.append(max(c, cum[-1]) if cum else c)
    return cum, boundary_sequence(infos, cum, grid)


def derive_fixed_spending(scenario: DesignScenario) -> FixedSpending:
    """Freeze the planned cumulative alphas of an HSD design."""
    cum, _ = planned_boundaries(scenario)
    return FixedSpending(tuple(cum), scenario.alpha)


def _duration(times, reject_probs):
    return float(np.dot(times, reject_probs) + times[-1] * (1.0 - np.sum(reject_probs)))


def gs_power(scenario: DesignScenario, grid: GridSettings = GridSettings()) -> DesignEvaluation:
    times = analysis_times(scenario)
    moments = [_Moments(scenario, t) for t in times]
    infos = [m.info for m in moments]
    means = [m.mean_u for m in moments]
    cum, criticals = planned_boundaries(scenario, infos, grid)

    cont = continuation_probabilities(infos, criticals, means, grid)
    cont_null = continuation_probabilities(infos, criticals, None, grid)
    reject = -np.diff(np.concatenate(([1.0], cont)))
    reject_null = -np.diff(np.concatenate(([1.0], cont_null)))

    looks = []
    for k, (t, m) in enumerate(zip(times, moments)):
        e0, e1 = float(m.events0.sum()), float(m.events1.sum())
        looks.append(DesignLook(
            analysis=k + 1,
            time=t,
            events_control=e0,
            events_experimental=e1,
            events=e0 + e1,
            info=infos[k],
            mean_u=means[k],
            drift=means[k] / math.sqrt(infos[k]),
            info_frac=infos[k] / infos[-1],
            cum_alpha=cum[k],
            critical=criticals[k],
            prob_reject=float(reject[k]),
            null_prob_reject=float(reject_null[k]),
        ))

    evaluation = DesignEvaluation(
        n_per_arm=scenario.n_per_arm,
        alpha=scenario.alpha,
        looks=tuple(looks),
        power=float(1.0 - cont[-1]),
        expected_duration=_duration(times, reject),
        null_power=float(1.0 - cont_null[-1]),
        null_expected_duration=_duration(times, reject_null),
    )
    logger.debug("n=%d: power %.4f, duration %.2f", scenario.n_per_arm, evaluation.power,
                 evaluation.expected_duration)
    return evaluation


def sample_size_search(template: DesignScenario, target_power: float,
                       step: int = DEFARGS["SEARCH_STEP"], n_max: int = DEFARGS["SEARCH_MAX_N"],
                       grid: GridSettings = GridSettings(), n_min: Optional[int] = None,
                       decimals: Optional[int] = None) -> int:
    """Smallest n per arm on the grid n_min, n_min + step, ... with power >= target.

    ``n_min`` defaults to ``step``. With ``decimals`` set, power is rounded
    before the comparison, which is how a printed power table is read.
    """
    if not template.alpha < target_power < 1:
        raise DomainError("Target power must lie in (alpha, 1)")
    if step < 1:
        raise DomainError("Search step must be >= 1")
    if n_min is None:
        n_min = step
    if n_min < 1:
        raise DomainError("Search start must be >= 1")
    if decimals is not None and decimals < 0:
        raise DomainError("Decimals must be >= 0")

    grid_n = list(range(n_min, n_max + 1, step))
    cache = {}

    def power(i):
        if i not in cache:
            cache[i] = gs_power(replace(template, n_per_arm=grid_n[i]), grid).power
        return cache[i]

    def reaches(i):
        p = power(i) if decimals is None else round(power(i), decimals)
        return p >= target_power

    if not grid_n or not reaches(len(grid_n) - 1):
        best = cache.get(len(grid_n) - 1)
        raise DesignError(
            "Target power %.3f not reached for n <= %d per arm (power at n=%d: %s)"
            % (target_power, n_max, grid_n[-1] if grid_n else 0,
               "n/a" if best is None else "%.4f" % best)
        )

    lo, hi = -1, len(grid_n) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    # power is monotone in n up to integration error; confirm the neighbour below
    while hi > 0 and reaches(hi - 1):
        hi -= 1
    logger.info("Smallest n per arm with power >= %.3f: %d (power %.4f)", target_power, grid_n[hi], power(hi))
    return grid_n[hi]


def power_table(template: DesignScenario, n_values: Sequence[int],
                grid: GridSettings = GridSettings()) -> pd.DataFrame:
    rows = []
    for n in n_values:
        ev = gs_power(replace(template, n_per_arm=int(n)), grid)
        rows.append({
            "n_per_arm": int(n),
            "events": ev.looks[-1].events,
            "max_info": ev.max_info,
            "power": ev.power,
            "expected_duration": ev.expected_duration,
            "null_power": ev.null_power,
        })
    return pd.DataFrame(rows)


def events_curve(scenario: DesignScenario, times: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """Expected events and information against calendar time."""
    if times is None:
        horizon = analysis_times(scenario)[-1]
        times = np.linspace(0.0, horizon, int(round(horizon)) + 1)
    rows = []
    for t in times:
        m = _Moments(scenario, float(t))
        rows.append({
            "time": float(t),
            "events_control": float(m.events0.sum()),
            "events_experimental": float(m.events1.sum()),
            "events": float(m.events.sum()),
            "info": m.info,
        })
    return pd.DataFrame(rows)

