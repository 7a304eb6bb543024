"""
Trial design documents.

A design document is JSON. Unknown keys are rejected and every problem is
reported with the path of the offending field, e.g.
``spending.gamma: must be non-zero``.
"""

import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from gswlr.default_values import DEFAULT_ARGUMENTS as DEFARGS
from gswlr.design import DesignScenario, PlannedSpending
from gswlr.errors import ConfigError, DomainError
from gswlr.gs_core import DEFAULT_INFO_CAPS, GsConfig
from gswlr.sim import SimScenario, frozen_spending
from gswlr.survival_models import PiecewiseExponential, PowerRecruitment
from gswlr.wlrt import parse_scheme

logger = logging.getLogger(__name__)

_DESIGN_KEYS = {
    "arms", "n_per_arm", "recruitment", "test", "schedule", "spending", "alpha",
    "futility_z", "info_caps", "summary", "time_step", "description",
}
_ARMS_KEYS = {"control", "experimental"}
_ARM_KEYS = {"change_points", "rates", "medians"}
_RECRUITMENT_KEYS = {"duration", "exponent"}
_TEST_KEYS = {"scheme", "t_star"}
_SCHEDULE_KEYS = {"calendar_times", "event_counts"}
_SPENDING_KEYS = {"kind", "gamma", "max_info", "cum_alphas"}
_SUMMARY_KEYS = {"milestone", "rmst"}
_GRID_KEYS = {"design", "spending_kinds", "t_stars", "recruitment_scenarios", "truths",
              "replicates", "seed", "description"}
_TRUTH_KEYS = {"control_median", "effects"}


def _join(path, key):
    return "%s.%s" % (path, key) if path else str(key)


def _fail(path, message):
    raise ConfigError("%s: %s" % (path or "<document>", message))


def _section(doc, key, path, required=True) -> Optional[Dict[str, Any]]:
    here = _join(path, key)
    if key not in doc or doc[key] is None:
        if required:
            _fail(here, "is required")
        return None
    if not isinstance(doc[key], dict):
        _fail(here, "must be an object")
    return doc[key]


def _check_keys(obj, allowed, path):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        _fail(_join(path, unknown[0]), "unknown key (allowed: %s)" % ", ".join(sorted(allowed)))


def _coerce(value, here, positive=False, integer=False):
    if value is None:
        _fail(here, "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(here, "must be a finite number")
    if integer and int(value) != value:
        _fail(here, "must be an integer")
    if positive and value <= 0:
        _fail(here, "must be > 0")
    return int(value) if integer else float(value)


def _number(obj, key, path, required=True, default=None, positive=False, integer=False):
    value = obj.get(key)
    if value is None and not required:
        return default
    return _coerce(value, _join(path, key), positive, integer)


def _numbers(obj, key, path, required=True):
    here = _join(path, key)
    value = obj.get(key)
    if value is None:
        if required:
            _fail(here, "is required")
        return None
    if not isinstance(value, list):
        _fail(here, "must be a list of numbers")
    return tuple(_coerce(v, _join(here, i)) for i, v in enumerate(value))


def _wrap(path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DomainError as e:
        _fail(path, str(e))


def parse_arm(obj, path) -> PiecewiseExponential:
    _check_keys(obj, _ARM_KEYS, path)
    change_points = _numbers(obj, "change_points", path, required=False) or ()
    rates = _numbers(obj, "rates", path, required=False)
    medians = _numbers(obj, "medians", path, required=False)
    if (rates is None) == (medians is None):
        _fail(path, "give exactly one of 'rates' and 'medians'")
    if rates is not None:
        return _wrap(path, PiecewiseExponential, change_points, rates)
    return _wrap(path, PiecewiseExponential.from_medians, medians, change_points)


def parse_recruitment(obj, path) -> PowerRecruitment:
    _check_keys(obj, _RECRUITMENT_KEYS, path)
    return _wrap(path, PowerRecruitment,
                 _number(obj, "duration", path, positive=True),
                 _number(obj, "exponent", path, required=False, default=1.0))


@dataclass(frozen=True)
class DesignSpec:
    """A parsed design document: the scenario plus analysis-time options."""

    name: str
    scenario: DesignScenario
    futility_z: Optional[float] = None
    info_caps: Tuple[float, ...] = DEFAULT_INFO_CAPS
    milestone: float = DEFARGS["MILESTONE"]
    rmst_tau: float = DEFARGS["RMST_TAU"]
    raw: Dict[str, Any] = field(default_factory=dict, compare=False)

    def gs_config(self, grid=None) -> GsConfig:
        rule = frozen_spending(self.scenario, self.scenario.spending.kind)
        kwargs = {} if grid is None else {"grid": grid}
        return GsConfig(rule, self.scenario.n_looks, self.info_caps, self.futility_z, **kwargs)

    def fingerprint(self) -> str:
        """Hash of everything that determines boundaries at analysis time."""
        relevant = {k: self.raw.get(k) for k in ("test", "schedule", "spending", "alpha", "info_caps")}
        if self.raw.get("spending", {}).get("max_info") is None:
            # derived max_info depends on the design models
            relevant.update({k: self.raw.get(k) for k in ("arms", "recruitment", "n_per_arm", "time_step")})
        text = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_design(doc, path="", name="design") -> DesignSpec:
    if not isinstance(doc, dict):
        _fail(path, "must be an object")
    _check_keys(doc, _DESIGN_KEYS, path)

    arms = _section(doc, "arms", path)
    arms_path = _join(path, "arms")
    _check_keys(arms, _ARMS_KEYS, arms_path)
    control = parse_arm(_section(arms, "control", arms_path), _join(arms_path, "control"))
    experimental = parse_arm(_section(arms, "experimental", arms_path), _join(arms_path, "experimental"))

    recruitment = parse_recruitment(_section(doc, "recruitment", path), _join(path, "recruitment"))

    test = _section(doc, "test", path)
    test_path = _join(path, "test")
    _check_keys(test, _TEST_KEYS, test_path)
    if not isinstance(test.get("scheme"), str):
        _fail(_join(test_path, "scheme"), "must be one of logrank, fh01, modest")
    scheme = _wrap(test_path, parse_scheme, test["scheme"],
                   _number(test, "t_star", test_path, required=False))

    schedule = _section(doc, "schedule", path)
    schedule_path = _join(path, "schedule")
    _check_keys(schedule, _SCHEDULE_KEYS, schedule_path)
    calendar_times = _numbers(schedule, "calendar_times", schedule_path, required=False)
    event_counts = _numbers(schedule, "event_counts", schedule_path, required=False)
    if (calendar_times is None) == (event_counts is None):
        _fail(schedule_path, "give exactly one of 'calendar_times' and 'event_counts'")

    spending_doc = _section(doc, "spending", path)
    spending_path = _join(path, "spending")
    _check_keys(spending_doc, _SPENDING_KEYS, spending_path)
    kind = spending_doc.get("kind", "hsd")
    if kind not in ("hsd", "fixed"):
        _fail(_join(spending_path, "kind"), "must be 'hsd' or 'fixed'")
    gamma = _number(spending_doc, "gamma", spending_path, required=kind == "hsd")
    if kind == "hsd" and gamma == 0:
        _fail(_join(spending_path, "gamma"), "must be non-zero")
    spending = _wrap(spending_path, PlannedSpending,
                     kind=kind,
                     gamma=gamma,
                     cum_alphas=_numbers(spending_doc, "cum_alphas", spending_path, required=kind == "fixed"),
                     max_info=_number(spending_doc, "max_info", spending_path, required=False, positive=True))

    alpha = _number(doc, "alpha", path, required=False, default=0.025)
    if not 0 < alpha < 0.5:
        _fail(_join(path, "alpha"), "must lie in (0, 0.5)")
    n_per_arm = _number(doc, "n_per_arm", path, positive=True, integer=True)

    scenario = _wrap(path, DesignScenario,
                     control=control,
                     experimental=experimental,
                     n_per_arm=n_per_arm,
                     recruitment=recruitment,
                     scheme=scheme,
                     calendar_times=calendar_times,
                     event_counts=event_counts,
                     spending=spending,
                     alpha=alpha,
                     time_step=_number(doc, "time_step", path, required=False,
                                       default=DEFARGS["TIME_STEP"], positive=True))
    if kind == "fixed" and len(spending.cum_alphas) != scenario.n_looks:
        _fail(_join(spending_path, "cum_alphas"), "needs one entry per analysis (%d)" % scenario.n_looks)
    if kind == "fixed" and not math.isclose(spending.cum_alphas[-1], alpha, rel_tol=1e-9):
        _fail(_join(spending_path, "cum_alphas"), "final entry must equal alpha")

    info_caps = _numbers(doc, "info_caps", path, required=False)
    if info_caps is not None and any(not 0 < c <= 1 for c in info_caps):
        _fail(_join(path, "info_caps"), "entries must lie in (0, 1]")

    summary = _section(doc, "summary", path, required=False) or {}
    _check_keys(summary, _SUMMARY_KEYS, _join(path, "summary"))

    return DesignSpec(
        name=name,
        scenario=scenario,
        futility_z=_number(doc, "futility_z", path, required=False),
        info_caps=DEFAULT_INFO_CAPS if info_caps is None else info_caps,
        milestone=_number(summary, "milestone", _join(path, "summary"), required=False,
                          default=DEFARGS["MILESTONE"], positive=True),
        rmst_tau=_number(summary, "rmst", _join(path, "summary"), required=False,
                         default=DEFARGS["RMST_TAU"], positive=True),
        raw=copy.deepcopy(doc),
    )


def load_document(path) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("%s: cannot read config (%s)" % (path, e.strerror))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("%s:%d:%d: invalid JSON: %s" % (path, e.lineno, e.colno, e.msg))
    if not isinstance(doc, dict):
        raise ConfigError("%s: top level must be an object" % path)
    return doc


def merge(base, override):
    """Recursive dict merge; ``override`` wins, lists are replaced."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_designs(doc) -> List[DesignSpec]:
    """A single design, or a ``base`` design with named ``designs`` overrides."""
    if "designs" not in doc:
        return [parse_design(doc)]
    _check_keys(doc, {"base", "designs", "description"}, "")
    base = _section(doc, "base", "", required=False) or {}
    designs = _section(doc, "designs", "")
    if not designs:
        _fail("designs", "must name at least one design")
    parsed = []
    for name, override in designs.items():
        if not isinstance(override, dict):
            _fail(_join("designs", name), "must be an object")
        parsed.append(parse_design(merge(base, override), _join("designs", name), name))
    return parsed


def load_designs(path) -> List[DesignSpec]:
    return parse_designs(load_document(path))


def load_design(path) -> DesignSpec:
    designs = load_designs(path)
    if len(designs) != 1:
        raise ConfigError("%s: expected a single design, found %d" % (path, len(designs)))
    return designs[0]


def parse_grid(doc, replicates=None, seed=None, futility_z=None) -> List[SimScenario]:
    """Expand a simulation grid document into scenarios.

    The design section fixes the analysis plan; each t* gets its own plan.
    Cells vary spending kind, recruitment scenario, control median and
    treatment effect.
    """
    _check_keys(doc, _GRID_KEYS, "")
    design_doc = _section(doc, "design", "")
    kinds = doc.get("spending_kinds", ["hsd"])
    if not isinstance(kinds, list) or not kinds or any(k not in ("hsd", "fixed") for k in kinds):
        _fail("spending_kinds", "must be a non-empty list of 'hsd'/'fixed'")
    t_stars = _numbers(doc, "t_stars", "", required=False)
    recruitments = _section(doc, "recruitment_scenarios", "")
    truths = doc.get("truths")
    if not isinstance(truths, list) or not truths:
        _fail("truths", "must be a non-empty list")
    if replicates is None:
        replicates = _number(doc, "replicates", "", required=False,
                             default=DEFARGS["REPLICATES"], positive=True, integer=True)
    if seed is None:
        seed = _number(doc, "seed", "", required=False, default=DEFARGS["SEED"], integer=True)

    plans = []
    for t_star in t_stars if t_stars is not None else (None,):
        d = copy.deepcopy(design_doc)
        if t_star is not None:
            d["test"] = {"scheme": "logrank"} if t_star == 0 else {"scheme": "modest", "t_star": t_star}
        dspec = parse_design(d, "design")
        if dspec.scenario.event_counts is None:
            _fail("design.schedule", "simulation grids need event_counts")
        plans.append((t_star, dspec))

    parsed_recruitment = {
        str(label): parse_recruitment(r, _join("recruitment_scenarios", label))
        for label, r in recruitments.items()
    }

    parsed_truths = []
    for i, truth in enumerate(truths):
        truth_path = "truths[%d]" % i
        if not isinstance(truth, dict):
            _fail(truth_path, "must be an object")
        _check_keys(truth, _TRUTH_KEYS, truth_path)
        median = _number(truth, "control_median", truth_path, positive=True)
        effects = _section(truth, "effects", truth_path)
        control = PiecewiseExponential.from_medians([median])
        for effect, arm in effects.items():
            parsed_truths.append((median, effect, control,
                                  parse_arm(arm, _join(_join(truth_path, "effects"), effect))))

    scenarios = []
    for kind in kinds:
        for t_star, dspec in plans:
            rule = _wrap("design.spending", frozen_spending, dspec.scenario, kind)
            logger.debug("t*=%s %s spending: %s", t_star, kind, rule)
            for rec_label, recruitment in parsed_recruitment.items():
                for median, effect, control, experimental in parsed_truths:
                    scenarios.append(SimScenario(
                        n_per_arm=dspec.scenario.n_per_arm,
                        event_counts=tuple(int(round(d)) for d in dspec.scenario.event_counts),
                        scheme=dspec.scenario.scheme,
                        spending=rule,
                        truth_control=control,
                        truth_experimental=experimental,
                        truth_recruitment=recruitment,
                        n_replicates=replicates,
                        seed=seed,
                        info_caps=dspec.info_caps,
                        futility_z=dspec.futility_z if futility_z is None else futility_z,
                        labels={
                            "spending": kind,
                            "recruitment": rec_label,
                            "effect": effect,
                            "control_median": median,
                            "t_star": getattr(dspec.scenario.scheme, "t_star", 0.0) if t_star is None else t_star,
                        },
                    ))
    return scenarios


def load_grid(path, replicates=None, seed=None, futility_z=None) -> List[SimScenario]:
    return parse_grid(load_document(path), replicates, seed, futility_z)
