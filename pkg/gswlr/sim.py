"""
Monte-Carlo trial engine.

Each replicate draws its own cohort from a substream seeded by
``(seed, replicate_index)``, then runs the event-triggered group-sequential
procedure exactly as an analyst would: cut the data at the d-th event,
compute the weighted log-rank statistic and step the sequential state.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from gswlr.counting import Cohort, apply_cutoff, cutoff_for_event_count
from gswlr.default_values import DEFAULT_ARGUMENTS as DEFARGS
from gswlr.design import DesignScenario, analysis_times, derive_fixed_spending, expected_information
from gswlr.errors import DomainError, NoEventsError, NumericalError
from gswlr.gs_core import (DEFAULT_INFO_CAPS, Decision, GsConfig, GsState, HsdSpending, SpendingRule,
                           gs_step)
from gswlr.integration import GridSettings
from gswlr.survival_models import PiecewiseExponential, PowerRecruitment
from gswlr.wlrt import WeightScheme, wlr_test

logger = logging.getLogger(__name__)

# coarse fixed grid for replicates; spacing stays bounded by a quarter increment sd
SIM_GRID = GridSettings(points=DEFARGS["SIM_GRID_POINTS"], refine=False)


@dataclass(frozen=True)
class SimScenario:
    """A frozen analysis plan run against possibly different true distributions."""

    n_per_arm: int
    event_counts: Tuple[int, ...]
    scheme: WeightScheme
    spending: SpendingRule
    truth_control: PiecewiseExponential
    truth_experimental: PiecewiseExponential
    truth_recruitment: PowerRecruitment
    n_replicates: int = DEFARGS["REPLICATES"]
    seed: int = DEFARGS["SEED"]
    info_caps: Tuple[float, ...] = DEFAULT_INFO_CAPS
    futility_z: Optional[float] = None
    grid: GridSettings = SIM_GRID
    labels: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n_replicates < 1:
            raise DomainError("At least one replicate is required")
        if self.n_per_arm < 1:
            raise DomainError("n_per_arm must be >= 1")
        counts = tuple(int(d) for d in self.event_counts)
        if not counts or counts[0] < 1 or any(b <= a for a, b in zip(counts, counts[1:])):
            raise DomainError("Event counts must be positive and strictly increasing")
        object.__setattr__(self, "event_counts", counts)

    @property
    def n_looks(self):
        return len(self.event_counts)

    def gs_config(self):
        return GsConfig(self.spending, self.n_looks, self.info_caps, self.futility_z, self.grid)


def frozen_spending(design: DesignScenario, kind: str) -> SpendingRule:
    """Analysis-time spending rule fixed from the design assumptions.

    ``hsd`` keeps the design's gamma with the expected final information as
    maximum information; ``fixed`` freezes the planned cumulative alphas.
    """
    if kind == "fixed":
        if design.spending.kind == "fixed":
            return design.spending.rule(design.alpha, design.spending.max_info)
        return derive_fixed_spending(design)
    if kind == "hsd":
        max_info = design.spending.max_info
        if max_info is None:
            max_info = expected_information(design, analysis_times(design)[-1])
        return HsdSpending(design.spending.gamma, max_info, design.alpha)
    raise DomainError("Spending kind must be 'hsd' or 'fixed'")


class TrialLook(NamedTuple):
    analysis: int
    cutoff: float
    events: int
    insufficient: bool
    v: float
    z: float
    cum_alpha: float
    critical: float
    decision: Decision


class Trajectory(NamedTuple):
    replicate: int
    looks: Tuple[TrialLook, ...]
    rejected: bool
    degenerate: bool
    duration: float
    stop_look: int

    @property
    def insufficient(self):
        return any(look.insufficient for look in self.looks)


def draw_cohort(scenario: SimScenario, replicate_index: int) -> Cohort:
    """2n subjects, the first n on control, from the replicate's own substreams."""
    root = np.random.SeedSequence([scenario.seed, replicate_index])
    ss_arrival, ss_survival = root.spawn(2)
    rng_arrival = np.random.default_rng(ss_arrival)
    rng_survival = np.random.default_rng(ss_survival)

    n = scenario.n_per_arm
    arrival = scenario.truth_recruitment.quantile(rng_arrival.random(2 * n))
    u = 1.0 - rng_survival.random(2 * n)
    time = np.concatenate((
        scenario.truth_control.quantile(u[:n]),
        scenario.truth_experimental.quantile(u[n:]),
    ))
    time = np.maximum(time, np.finfo(float).tiny)
    arm = np.repeat(np.array([0, 1], dtype=np.int8), n)
    return Cohort(arrival, time, np.ones(2 * n, dtype=bool), arm)


def simulate_trial(scenario: SimScenario, replicate_index: int) -> Trajectory:
    cohort = draw_cohort(scenario, replicate_index)
    state = GsState(scenario.gs_config())
    looks: List[TrialLook] = []
    duration = 0.0

    for k, d in enumerate(scenario.event_counts, start=1):
        cut = cutoff_for_event_count(cohort, d)
        if cut.n_events == 0:
            logger.debug("Replicate %d: no events before look %d", replicate_index, k)
            return Trajectory(replicate_index, tuple(looks), False, True, duration, k)
        duration = cut.time
        try:
            result = wlr_test(apply_cutoff(cohort, cut.time), scenario.scheme)
        except (NumericalError, NoEventsError) as e:
            logger.debug("Replicate %d, look %d: %s", replicate_index, k, e)
            return Trajectory(replicate_index, tuple(looks), False, True, duration, k)

        # with too few events every later look would see the same data
        state = gs_step(state, result.v, result.z, is_final=not cut.sufficient)
        rec = state.looks[-1]
        looks.append(TrialLook(k, cut.time, cut.n_events, not cut.sufficient,
                               rec.v, rec.z, rec.cum_alpha, rec.critical, rec.decision))
        if state.stopped:
            break

    rejected = state.decision is Decision.REJECT
    return Trajectory(replicate_index, tuple(looks), rejected, False, duration, len(looks))


class _Outcomes(NamedTuple):
    """Per-replicate results packed column-wise, in replicate order."""

    rejected: np.ndarray
    stop_look: np.ndarray
    duration: np.ndarray
    z: np.ndarray
    v: np.ndarray
    events: np.ndarray
    insufficient: np.ndarray
    degenerate: np.ndarray
    futility: np.ndarray


def _pack(trajectories: Sequence[Trajectory], n_looks: int) -> _Outcomes:
    m = len(trajectories)
    z = np.full((m, n_looks), np.nan)
    v = np.full((m, n_looks), np.nan)
    events = np.full((m, n_looks), np.nan)
    for i, tr in enumerate(trajectories):
        for look in tr.looks:
            z[i, look.analysis - 1] = look.z
            v[i, look.analysis - 1] = look.v
            events[i, look.analysis - 1] = look.events
    return _Outcomes(
        rejected=np.array([tr.rejected for tr in trajectories], dtype=bool),
        stop_look=np.array([tr.stop_look for tr in trajectories], dtype=int),
        duration=np.array([tr.duration for tr in trajectories]),
        z=z,
        v=v,
        events=events,
        insufficient=np.array([tr.insufficient for tr in trajectories], dtype=bool),
        degenerate=np.array([tr.degenerate for tr in trajectories], dtype=bool),
        futility=np.array([bool(tr.looks) and tr.looks[-1].decision is Decision.STOP_FOR_FUTILITY
                           for tr in trajectories], dtype=bool),
    )


def _run_chunk(scenario: SimScenario, start: int, stop: int) -> _Outcomes:
    return _pack([simulate_trial(scenario, i) for i in range(start, stop)], scenario.n_looks)


@dataclass(frozen=True)
class SimSummary:
    n_replicates: int
    rejection_prob: float
    mc_se: Optional[float]
    stop_fractions: Tuple[float, ...]
    reject_fractions: Tuple[float, ...]
    mean_duration: float
    mean_events: Tuple[Optional[float], ...]
    mean_v: Tuple[Optional[float], ...]
    corr_z12: Optional[float]
    insufficient_rate: float
    degenerate_rate: float
    futility_rate: float
    labels: Dict[str, object] = field(default_factory=dict, compare=False)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "labels"}
        d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        d.update(self.labels)
        return d


def _nan_mean(column):
    seen = column[~np.isnan(column)]
    return float(seen.mean()) if len(seen) else None


def summarize(outcomes: _Outcomes, labels=None) -> SimSummary:
    n = len(outcomes.rejected)
    n_looks = outcomes.z.shape[1]
    p = float(outcomes.rejected.mean())
    mc_se = math.sqrt(p * (1.0 - p) / n) if n >= 2 else None

    stop_fractions = tuple(float(np.mean(outcomes.stop_look == k)) for k in range(1, n_looks + 1))
    reject_fractions = tuple(float(np.mean(outcomes.rejected & (outcomes.stop_look == k)))
                             for k in range(1, n_looks + 1))

    corr = None
    if n_looks >= 2:
        both = ~np.isnan(outcomes.z[:, 0]) & ~np.isnan(outcomes.z[:, 1])
        if both.sum() >= 3:
            z1, z2 = outcomes.z[both, 0], outcomes.z[both, 1]
            if z1.std() > 0 and z2.std() > 0:
                corr = float(np.corrcoef(z1, z2)[0, 1])

    return SimSummary(
        n_replicates=n,
        rejection_prob=p,
        mc_se=mc_se,
        stop_fractions=stop_fractions,
        reject_fractions=reject_fractions,
        mean_duration=float(outcomes.duration.mean()),
        mean_events=tuple(_nan_mean(outcomes.events[:, k]) for k in range(n_looks)),
        mean_v=tuple(_nan_mean(outcomes.v[:, k]) for k in range(n_looks)),
        corr_z12=corr,
        insufficient_rate=float(outcomes.insufficient.mean()),
        degenerate_rate=float(outcomes.degenerate.mean()),
        futility_rate=float(outcomes.futility.mean()),
        labels=dict(labels or {}),
    )


def run_replicates(scenario: SimScenario, n_jobs: int = DEFARGS["JOBS"],
                   chunk_size: int = DEFARGS["CHUNK_SIZE"]) -> _Outcomes:
    """All replicates of one scenario, concatenated in replicate order."""
    if chunk_size < 1:
        raise DomainError("Chunk size must be >= 1")
    bounds = [(s, min(s + chunk_size, scenario.n_replicates))
              for s in range(0, scenario.n_replicates, chunk_size)]
    if n_jobs == 1:
        chunks = [_run_chunk(scenario, s, e) for s, e in bounds]
    else:
        chunks = Parallel(n_jobs=n_jobs)(delayed(_run_chunk)(scenario, s, e) for s, e in bounds)
    return _Outcomes(*(np.concatenate(cols) for cols in zip(*chunks)))


def run_scenario(scenario: SimScenario, n_jobs: int = DEFARGS["JOBS"],
                 chunk_size: int = DEFARGS["CHUNK_SIZE"]) -> SimSummary:
    outcomes = run_replicates(scenario, n_jobs, chunk_size)
    summary = summarize(outcomes, scenario.labels)
    logger.info("%s: rejection %.4f (se %s) over %d replicates", scenario.labels or "scenario",
                summary.rejection_prob, "n/a" if summary.mc_se is None else "%.4f" % summary.mc_se,
                summary.n_replicates)
    return summary


def run_grid(scenarios: Sequence[SimScenario], n_jobs: int = DEFARGS["JOBS"],
             chunk_size: int = DEFARGS["CHUNK_SIZE"]) -> List[SimSummary]:
    if not scenarios:
        raise DomainError("Simulation grid is empty")
    return [run_scenario(s, n_jobs, chunk_size) for s in scenarios]


def with_replicates(scenarios: Sequence[SimScenario], n_replicates=None, seed=None) -> List[SimScenario]:
    changes = {}
    if n_replicates is not None:
        changes["n_replicates"] = n_replicates
    if seed is not None:
        changes["seed"] = seed
    return [replace(s, **changes) for s in scenarios]


def grid_frame(summaries: Sequence[SimSummary]) -> pd.DataFrame:
    """One row per scenario; list-valued columns are expanded per look."""
    rows = []
    for s in summaries:
        row = dict(s.labels)
        row.update({
            "power": s.rejection_prob,
            "mc_se": s.mc_se,
            "mean_duration": s.mean_duration,
            "corr_z12": s.corr_z12,
            "insufficient_rate": s.insufficient_rate,
            "degenerate_rate": s.degenerate_rate,
            "futility_rate": s.futility_rate,
            "n_replicates": s.n_replicates,
        })
        for k, (stop, ev, v) in enumerate(zip(s.stop_fractions, s.mean_events, s.mean_v), start=1):
            row["stop_%d" % k] = stop
            row["events_%d" % k] = ev
            row["v_%d" % k] = v
        rows.append(row)
    return pd.DataFrame(rows)


def wide_table(frame: pd.DataFrame, value: str = "power") -> pd.DataFrame:
    """Recruitment x effect rows against control median x t* columns."""
    index = [c for c in ("spending", "recruitment", "effect") if c in frame.columns]
    columns = [c for c in ("control_median", "t_star") if c in frame.columns]
    if not index or not columns:
        raise DomainError("Grid frame lacks the labels needed for a wide table")
    return frame.pivot_table(index=index, columns=columns, values=value, aggfunc="first", sort=False)
