"""
Group-sequential engine: alpha spending, boundaries, the sequential
decision state and the stage-wise ordering p-value.

Benefit corresponds to large negative scores, so a look rejects the null
hypothesis when ``Z_k < c_k`` with ``c_k`` on the negative z-scale.
"""

import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from gswlr.errors import DomainError, StateError
from gswlr.integration import GridSettings, continuation_probabilities, solve_boundary

logger = logging.getLogger(__name__)

DEFAULT_INFO_CAPS = (0.95, 0.975)


def _check_alpha(alpha):
    if not 0 < alpha < 0.5:
        raise DomainError("One-sided alpha must lie in (0, 0.5), got %r" % alpha)


def hsd_alpha(gamma: float, info_frac: float, alpha: float) -> float:
    """Hwang-Shih-DeCani cumulative alpha spend at an information fraction."""
    if gamma == 0:
        raise DomainError("HSD gamma must be non-zero")
    if info_frac < 0:
        raise DomainError("Information fraction must be >= 0")
    if info_frac >= 1:
        return alpha
    return alpha * (1.0 - math.exp(-gamma * info_frac)) / (1.0 - math.exp(-gamma))


@dataclass(frozen=True)
class HsdSpending:
    gamma: float
    max_info: float
    alpha: float = 0.025

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.gamma == 0:
            raise DomainError("HSD gamma must be non-zero")
        if not self.max_info > 0:
            raise DomainError("max_info must be > 0")

    def cum_alpha(self, k: int, v: float) -> float:
        return hsd_alpha(self.gamma, v / self.max_info, self.alpha)

    def to_dict(self):
        return {"kind": "hsd", "gamma": self.gamma, "max_info": self.max_info, "alpha": self.alpha}


@dataclass(frozen=True)
class FixedSpending:
    cum_alphas: Tuple[float, ...]
    alpha: float = 0.025
    max_info: Optional[float] = None

    def __post_init__(self):
        _check_alpha(self.alpha)
        cum = tuple(float(a) for a in self.cum_alphas)
        if not cum:
            raise DomainError("Fixed spending needs at least one cumulative alpha")
        if any(b < a for a, b in zip(cum, cum[1:])) or cum[0] < 0:
            raise DomainError("Cumulative alphas must be non-decreasing and >= 0")
        if not math.isclose(cum[-1], self.alpha, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError("Final cumulative alpha must equal alpha (%g != %g)" % (cum[-1], self.alpha))
        if self.max_info is not None and not self.max_info > 0:
            raise DomainError("max_info must be > 0")
        object.__setattr__(self, "cum_alphas", cum)

    def cum_alpha(self, k: int, v: float) -> float:
        if k > len(self.cum_alphas):
            return self.alpha
        return self.cum_alphas[k - 1]

    def to_dict(self):
        d = {"kind": "fixed", "cum_alphas": list(self.cum_alphas), "alpha": self.alpha}
        if self.max_info is not None:
            d["max_info"] = self.max_info
        return d


SpendingRule = Union[HsdSpending, FixedSpending]


@dataclass(frozen=True)
class CovModel:
    """Independent-increments covariance of a score sequence."""

    variances: Tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(x) for x in self.variances)
        if any(x <= 0 for x in v):
            raise DomainError("Variances must be > 0")
        object.__setattr__(self, "variances", v)

    def correlation(self, l: int, k: int) -> float:
        vl, vk = self.variances[l], self.variances[k]
        return min(1.0, math.sqrt(min(vl, vk) / max(vl, vk)))

    def matrix(self):
        """Correlation matrix of Z_1..Z_K."""
        k = len(self.variances)
        return np.array([[self.correlation(i, j) for j in range(k)] for i in range(k)])


def first_boundary(cum_alpha_1: float) -> float:
    if not 0 <= cum_alpha_1 < 1:
        raise DomainError("Cumulative alpha must lie in [0, 1)")
    if cum_alpha_1 == 0:
        return -np.inf
    return float(norm.ppf(cum_alpha_1))


def next_boundary(
    prior_criticals: Sequence[float],
    cov: CovModel,
    cum_alpha: float,
    prev_cum_alpha: Optional[float] = None,
    is_final: bool = True,
    grid: GridSettings = GridSettings(),
) -> float:
    """Critical value for the newest look in ``cov``.

    ``prev_cum_alpha`` defaults to ``-inf`` meaning "unknown": the boundary is
    then always solved for. An interim look whose variance does not exceed
    the previous one cannot reject.
    """
    v = cov.variances
    if len(v) != len(prior_criticals) + 1:
        raise DomainError("Need one more variance than prior critical values")
    if len(v) == 1:
        return first_boundary(cum_alpha)
    if not is_final and v[-1] <= v[-2]:
        return -np.inf
    if prev_cum_alpha is None:
        prev_cum_alpha = -np.inf
    return solve_boundary(v, prior_criticals, cum_alpha, prev_cum_alpha, grid)


class Decision(str, enum.Enum):
    CONTINUE = "continue"
    REJECT = "reject"
    STOP_ALL_ALPHA_SPENT = "stop_all_alpha_spent"
    STOP_FOR_FUTILITY = "stop_for_futility"

    @property
    def stops(self):
        return self is not Decision.CONTINUE


def futility_check(z_k: float, futility_z: Optional[float] = None) -> Decision:
    """Non-binding z-scale futility rule."""
    if futility_z is not None and z_k > futility_z:
        return Decision.STOP_FOR_FUTILITY
    return Decision.CONTINUE


@dataclass(frozen=True)
class GsConfig:
    spending: SpendingRule
    max_looks: int
    info_caps: Tuple[float, ...] = DEFAULT_INFO_CAPS
    futility_z: Optional[float] = None
    grid: GridSettings = GridSettings()

    def __post_init__(self):
        if self.max_looks < 1:
            raise DomainError("At least one analysis is required")
        caps = tuple(float(c) for c in self.info_caps)
        if any(not 0 < c <= 1 for c in caps):
            raise DomainError("Information caps must lie in (0, 1]")
        object.__setattr__(self, "info_caps", caps)
        if isinstance(self.spending, FixedSpending) and len(self.spending.cum_alphas) != self.max_looks:
            raise DomainError(
                "Fixed spending lists %d cumulative alphas for %d analyses"
                % (len(self.spending.cum_alphas), self.max_looks)
            )

    @property
    def alpha(self):
        return self.spending.alpha


@dataclass(frozen=True)
class LookRecord:
    analysis: int
    v: float
    z: float
    cum_alpha: float
    critical: float
    decision: Decision
    info_frac: Optional[float] = None

    @property
    def u(self):
        return self.z * math.sqrt(self.v)

    def to_dict(self):
        return {
            "analysis": self.analysis,
            "v": self.v,
            "z": self.z,
            "u": self.u,
            "cum_alpha": self.cum_alpha,
            "critical": None if self.critical == -np.inf else self.critical,
            "decision": self.decision.value,
            "info_frac": self.info_frac,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            critical = d["critical"]
            return cls(
                analysis=int(d["analysis"]),
                v=float(d["v"]),
                z=float(d["z"]),
                cum_alpha=float(d["cum_alpha"]),
                critical=-np.inf if critical is None else float(critical),
                decision=Decision(d["decision"]),
                info_frac=d.get("info_frac"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise StateError("Malformed look record %r: %s" % (d, e))


@dataclass(frozen=True)
class GsState:
    config: GsConfig
    looks: Tuple[LookRecord, ...] = field(default_factory=tuple)

    @property
    def k(self):
        return len(self.looks)

    @property
    def stopped(self):
        return bool(self.looks) and self.looks[-1].decision.stops

    @property
    def decision(self) -> Optional[Decision]:
        return self.looks[-1].decision if self.looks else None

    @property
    def variances(self):
        return [r.v for r in self.looks]

    @property
    def criticals(self):
        return [r.critical for r in self.looks]

    @property
    def cum_alpha(self):
        return self.looks[-1].cum_alpha if self.looks else 0.0

    def audit(self):
        return [r.to_dict() for r in self.looks]

    def to_json(self, **kwargs):
        return json.dumps(self.audit(), **kwargs)

    @classmethod
    def from_audit(cls, config: GsConfig, records):
        looks = tuple(LookRecord.from_dict(r) for r in records)
        for i, r in enumerate(looks, start=1):
            if r.analysis != i:
                raise StateError("Look records out of order at position %d" % i)
        cums = [r.cum_alpha for r in looks]
        if any(b < a for a, b in zip(cums, cums[1:])):
            raise StateError("Cumulative alpha decreases across recorded looks")
        if cums and cums[-1] > config.alpha * (1 + 1e-9):
            raise StateError("Recorded cumulative alpha exceeds alpha")
        if any(r.decision.stops for r in looks[:-1]):
            raise StateError("Recorded looks continue after a stopping decision")
        if len(looks) > config.max_looks:
            raise StateError("More recorded looks than planned analyses")
        return cls(config, looks)


def gs_step(state: GsState, v_k: float, z_k: float, is_final: bool = False) -> GsState:
    """Record analysis k = state.k + 1 and decide."""
    cfg = state.config
    k = state.k + 1
    if state.stopped:
        raise StateError("Trial already stopped at analysis %d (%s)" % (state.k, state.decision.value))
    if k > cfg.max_looks:
        raise StateError("Analysis %d exceeds the planned maximum of %d" % (k, cfg.max_looks))
    if not v_k > 0:
        raise DomainError("Observed variance must be > 0")

    rule = cfg.spending
    alpha = rule.alpha
    prev_cum = state.cum_alpha
    final = is_final or k == cfg.max_looks

    info_frac = v_k / rule.max_info if rule.max_info else None
    if info_frac is not None and k <= len(cfg.info_caps) and info_frac > cfg.info_caps[k - 1]:
        logger.info("Information fraction %.3f exceeds cap at analysis %d: final analysis", info_frac, k)
        final = True

    if not final and state.looks and v_k <= state.looks[-1].v:
        logger.warning("Variance did not increase at analysis %d: boundary set to -inf", k)
        cum, critical = prev_cum, -np.inf
    else:
        cum = alpha if final else min(alpha, max(prev_cum, rule.cum_alpha(k, v_k)))
        if cum >= alpha:
            final = True
        cov = CovModel(tuple(state.variances) + (v_k,))
        critical = next_boundary(state.criticals, cov, cum, prev_cum, final, cfg.grid)

    if z_k < critical:
        decision = Decision.REJECT
    elif final:
        decision = Decision.STOP_ALL_ALPHA_SPENT
    else:
        decision = futility_check(z_k, cfg.futility_z)

    record = LookRecord(k, float(v_k), float(z_k), float(cum), float(critical), decision, info_frac)
    logger.debug("Analysis %d: %s", k, record.to_dict())
    return replace(state, looks=state.looks + (record,))


def stagewise_p(
    criticals: Sequence[float],
    variances: Sequence[float],
    z_stop: float,
    grid: GridSettings = GridSettings(),
) -> float:
    """Stage-wise ordering p-value for a trial stopped at look m = len(variances).

    ``criticals`` holds the boundaries actually used at looks 1..m-1.
    """
    if len(variances) != len(criticals) + 1:
        raise DomainError("Need one more variance than critical values")
    if len(variances) == 1:
        return float(norm.cdf(z_stop))
    bounds = list(criticals) + [z_stop]
    return float(1.0 - continuation_probabilities(variances, bounds, grid=grid)[-1])


def state_stagewise_p(state: GsState) -> float:
    if not state.looks:
        raise StateError("No analyses recorded")
    return stagewise_p(state.criticals[:-1], state.variances, state.looks[-1].z, state.config.grid)
