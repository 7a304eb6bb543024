import json
from pathlib import Path

import pytest

from gswlr.config import (load_design, load_designs, load_document, load_grid, merge, parse_design,
                          parse_grid)
from gswlr.errors import ConfigError
from gswlr.gs_core import FixedSpending, HsdSpending
from gswlr.wlrt import LogRank, ModestWeight

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def design_doc(**overrides):
    doc = {
        "arms": {
            "control": {"medians": [8]},
            "experimental": {"change_points": [4], "medians": [8, 16.6]},
        },
        "n_per_arm": 150,
        "recruitment": {"duration": 8},
        "test": {"scheme": "modest", "t_star": 6},
        "schedule": {"event_counts": [122, 170, 203]},
        "spending": {"kind": "hsd", "gamma": -4, "max_info": 103.4},
    }
    return merge(doc, overrides)


def test_parse_design():
    dspec = parse_design(design_doc())

    assert dspec.scenario.n_per_arm == 150
    assert dspec.scenario.scheme == ModestWeight(6.0)
    assert dspec.scenario.event_counts == (122.0, 170.0, 203.0)
    assert dspec.scenario.alpha == 0.025
    assert dspec.info_caps == (0.95, 0.975)
    assert dspec.milestone == 18.0

    config = dspec.gs_config()
    assert config.spending == HsdSpending(-4.0, 103.4, 0.025)
    assert config.max_looks == 3


def test_shipped_designs_parse():
    assert load_design(CONFIGS / "analysis_hsd.json").scenario.spending.max_info == 103.4
    assert load_design(CONFIGS / "analysis_fixed.json").gs_config().spending == FixedSpending((0.00301, 0.0106, 0.025))

    single_look = load_designs(CONFIGS / "single_look.json")
    candidates = load_designs(CONFIGS / "candidate_designs.json")
    assert len(single_look) == 4
    assert len(candidates) == 10
    assert {s.name for s in candidates} >= {"single_stage", "stages_11_16_21_gamma_-4"}
    assert all(s.scenario.calendar_times[-1] == 21.0 for s in candidates)


def test_shipped_grids_parse():
    hsd = load_grid(CONFIGS / "robustness_hsd.json", replicates=10)
    fixed = load_grid(CONFIGS / "robustness_fixed.json", replicates=10, seed=5)

    assert len(hsd) == 72
    assert len(fixed) == 72
    assert {s.labels["t_star"] for s in hsd} == {0.0, 6.0, 12.0}
    assert all(s.n_replicates == 10 for s in hsd)
    assert all(s.seed == 5 for s in fixed)
    assert all(isinstance(s.spending, FixedSpending) for s in fixed)
    assert all(s.event_counts == (122, 170, 203) for s in hsd)
    assert isinstance([s for s in hsd if s.labels["t_star"] == 0.0][0].scheme, LogRank)


@pytest.mark.parametrize("overrides, message", [
    ({"spending": {"gamma": 0}}, "spending.gamma: must be non-zero"),
    ({"alpha": 0}, "alpha: must lie in (0, 0.5)"),
    ({"n_per_arm": 10.5}, "n_per_arm: must be an integer"),
    ({"recruitment": {"duration": -8}}, "recruitment.duration: must be > 0"),
    ({"test": {"scheme": "maxcombo"}}, "test"),
    ({"arms": {"control": {"rates": [0.1]}}}, "arms.control: give exactly one of"),
    ({"schedule": {"calendar_times": [11, 16, 21]}}, "schedule: give exactly one of"),
    ({"info_caps": [0.95, 1.5]}, "info_caps: entries must lie in (0, 1]"),
    ({"spending": {"kind": "fixed", "cum_alphas": [0.01, 0.025]}}, "spending.cum_alphas: needs one entry"),
    ({"arms": {"control": {"medians": [8, None]}}}, "arms.control.medians.1: is required"),
    ({"arms": {"control": {"medians": [8, "x"]}}}, "arms.control.medians.1: must be a finite number"),
    ({"arms": {"control": {"medians": 8}}}, "arms.control.medians: must be a list of numbers"),
])
def test_invalid_design(overrides, message):
    with pytest.raises(ConfigError) as e:
        parse_design(design_doc(**overrides))

    assert message in str(e.value)


def test_unknown_key_is_reported_with_path():
    with pytest.raises(ConfigError, match=r"spending\.gama: unknown key"):
        parse_design(design_doc(spending={"gama": -4}))
    with pytest.raises(ConfigError, match=r"colour: unknown key"):
        parse_design(design_doc(colour="blue"))


def test_invalid_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "n_per_arm": 150,\n  "alpha": \n}\n')

    with pytest.raises(ConfigError, match=r"broken\.json:4:1: invalid JSON"):
        load_document(path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_document(tmp_path / "missing.json")


def test_fingerprint():
    dspec = parse_design(design_doc())

    assert dspec.fingerprint() == parse_design(design_doc(description="renamed")).fingerprint()
    assert dspec.fingerprint() == parse_design(design_doc(summary={"milestone": 12})).fingerprint()
    assert dspec.fingerprint() != parse_design(design_doc(spending={"gamma": -2})).fingerprint()
    assert dspec.fingerprint() != parse_design(design_doc(test={"t_star": 12})).fingerprint()


def test_fingerprint_without_max_info_tracks_the_models():
    doc = design_doc()
    del doc["spending"]["max_info"]
    other = merge(doc, {"n_per_arm": 160})

    assert parse_design(doc).fingerprint() != parse_design(other).fingerprint()


def test_merge_replaces_lists():
    merged = merge({"a": {"b": [1, 2], "c": 1}}, {"a": {"b": [3]}})

    assert merged == {"a": {"b": [3], "c": 1}}


def test_grid_requires_event_schedule():
    doc = json.loads((CONFIGS / "robustness_hsd.json").read_text())
    doc["design"]["schedule"] = {"calendar_times": [11, 16, 21]}

    with pytest.raises(ConfigError, match="design.schedule: simulation grids need event_counts"):
        parse_grid(doc, replicates=1)
