import math
from dataclasses import replace

import pytest

from gswlr.design import (DesignScenario, PlannedSpending, derive_fixed_spending, drift, events_curve,
                          events_to_calendar, expected_events, expected_information, gs_power,
                          power_table, sample_size_search, schoenfeld_events, single_look_power)
from gswlr.errors import DesignError, DomainError
from gswlr.integration import GridSettings
from gswlr.wlrt import FlemingHarrington01, LogRank, ModestWeight

MWLR6 = ModestWeight(6.0)

# n per arm -> (events 0m, events 4m, LR 0m, LR 4m, MWLR 0m, MWLR 4m)
POWER_GRID = {
    150: (207, 203, 0.87, 0.84, 0.87, 0.91),
    160: (221, 217, 0.89, 0.86, 0.89, 0.92),
    165: (228, 223, 0.90, 0.87, 0.90, 0.93),
    180: (248, 244, 0.92, 0.90, 0.92, 0.95),
}


@pytest.mark.parametrize("n", sorted(POWER_GRID))
def test_single_look_events_and_power(single_look, delay_model, n):
    events_ph, events_delay, lr_ph, lr_delay, mw_ph, mw_delay = POWER_GRID[n]

    assert expected_events(single_look(n_per_arm=n), 21.0)[2] == pytest.approx(events_ph, abs=1.5)
    assert expected_events(single_look(delay_model, n_per_arm=n), 21.0)[2] == pytest.approx(events_delay, abs=1.5)

    assert gs_power(single_look(n_per_arm=n)).power == pytest.approx(lr_ph, abs=0.01)
    assert gs_power(single_look(delay_model, n_per_arm=n)).power == pytest.approx(lr_delay, abs=0.01)
    assert gs_power(single_look(scheme=MWLR6, n_per_arm=n)).power == pytest.approx(mw_ph, abs=0.01)
    assert gs_power(single_look(delay_model, MWLR6, n)).power == pytest.approx(mw_delay, abs=0.01)


def test_single_look_power_matches_group_sequential_engine(single_look, delay_model):
    scenario = single_look(delay_model, MWLR6, 150)

    assert single_look_power(scenario, 21.0) == pytest.approx(gs_power(scenario).power, abs=1e-6)


def test_no_events_at_time_zero(delay_design):
    assert expected_events(delay_design, 0.0) == (0.0, 0.0, 0.0)
    assert expected_information(delay_design, 0.0) == 0.0
    assert drift(delay_design, 0.0) == 0.0


def test_expected_events_increase(delay_design):
    totals = [expected_events(delay_design, t)[2] for t in (2, 5, 11, 16, 21, 40)]

    assert all(b > a for a, b in zip(totals, totals[1:]))
    assert totals[-1] < 2 * delay_design.n_per_arm


def test_planned_maximum_information(delay_design):
    assert expected_information(delay_design, 21.0) == pytest.approx(103.4, abs=0.2)


def test_logrank_information_is_quarter_of_events(single_look):
    scenario = single_look()

    assert expected_information(scenario, 21.0) == pytest.approx(expected_events(scenario, 21.0)[2] / 4, rel=1e-12)


def test_logrank_drift_under_proportional_hazards(single_look):
    scenario = single_look()
    events = expected_events(scenario, 21.0)[2]

    assert drift(scenario, 21.0) == pytest.approx(math.log(8 / 12.3) * math.sqrt(events / 4), rel=1e-9)


def test_null_design(delay_design):
    null = delay_design.null()
    evaluation = gs_power(null)

    assert drift(null, 21.0) == pytest.approx(0.0, abs=1e-12)
    assert evaluation.power == pytest.approx(0.025, abs=1e-6)
    assert evaluation.null_power == pytest.approx(0.025, abs=1e-6)


def test_fleming_harrington_beats_logrank_under_delay(single_look, delay_model):
    lr = gs_power(single_look(delay_model, LogRank(), 150)).power
    fh = gs_power(single_look(delay_model, FlemingHarrington01(), 150)).power

    assert fh > lr


def test_events_to_calendar(delay_design):
    assert events_to_calendar(delay_design, 122) == pytest.approx(11.0, abs=0.1)
    assert events_to_calendar(delay_design, 170) == pytest.approx(16.0, abs=0.1)
    assert events_to_calendar(delay_design, 203) == pytest.approx(21.0, abs=0.2)
    assert events_to_calendar(delay_design, 0) == 0.0

    with pytest.raises(DesignError):
        events_to_calendar(delay_design, 400)
    with pytest.raises(DomainError):
        events_to_calendar(delay_design, -1)


def test_event_schedule_matches_calendar_schedule(delay_design):
    by_events = replace(delay_design, calendar_times=None, event_counts=(122.0, 170.0, 203.0))

    assert gs_power(by_events).power == pytest.approx(gs_power(delay_design).power, abs=0.01)


# (calendar times, gamma) -> (expected duration, power)
DESIGN_OPTIONS = [
    ((21.0,), -4.0, 21.0, 0.91),
    ((21.0,), 1.0, 21.0, 0.91),
    ((11.0, 21.0), -4.0, 20.1, 0.90),
    ((11.0, 21.0), -1.5, 19.4, 0.89),
    ((11.0, 21.0), 1.0, 18.8, 0.86),
    ((16.0, 21.0), -4.0, 17.9, 0.90),
    ((16.0, 21.0), -1.5, 17.6, 0.88),
    ((16.0, 21.0), 1.0, 17.4, 0.86),
    ((11.0, 16.0, 21.0), -4.0, 17.6, 0.90),
    ((11.0, 16.0, 21.0), -1.5, 17.0, 0.88),
    ((11.0, 16.0, 21.0), 1.0, 16.7, 0.83),
]


@pytest.mark.parametrize("times, gamma, duration, power", DESIGN_OPTIONS)
def test_design_options(delay_design, times, gamma, duration, power):
    scenario = replace(delay_design, calendar_times=times, spending=PlannedSpending("hsd", gamma))
    evaluation = gs_power(scenario)

    assert evaluation.expected_duration == pytest.approx(duration, abs=0.2)
    assert evaluation.power == pytest.approx(power, abs=0.01)


def test_design_evaluation_invariants(delay_design):
    evaluation = gs_power(delay_design)
    infos = [look.info for look in evaluation.looks]

    assert all(b > a for a, b in zip(infos, infos[1:]))
    assert evaluation.max_info == infos[-1]
    assert evaluation.expected_duration <= 21.0
    assert sum(evaluation.stop_probabilities) == pytest.approx(1.0)
    assert evaluation.looks[-1].cum_alpha == 0.025
    assert evaluation.to_dict()["looks"][0]["analysis"] == 1


def test_time_step_halving_is_stable(delay_design):
    coarse = gs_power(delay_design).power
    fine = gs_power(replace(delay_design, time_step=delay_design.time_step / 2)).power

    assert abs(coarse - fine) < 5e-4


def test_derived_fixed_spending(delay_design):
    fixed = derive_fixed_spending(delay_design)

    assert fixed.cum_alphas[0] == pytest.approx(0.00301, abs=2e-4)
    assert fixed.cum_alphas[1] == pytest.approx(0.0106, abs=5e-4)
    assert fixed.cum_alphas[2] == 0.025


# rows of the printed power table are read at two decimals
@pytest.mark.parametrize("experimental, scheme, expected", [
    ("ph", LogRank(), 165),
    ("delay", LogRank(), 180),
    ("ph", MWLR6, 165),
    ("delay", MWLR6, 150),
])
def test_sample_size_search_on_table_rows(single_look, delay_model, experimental, scheme, expected):
    template = single_look(delay_model if experimental == "delay" else None, scheme, 100)

    assert sample_size_search(template, 0.9, step=5, n_min=150, n_max=180, decimals=2) == expected


def test_sample_size_search_exact_power(single_look, delay_model):
    template = single_look(delay_model, LogRank(), 100)

    # 180 per arm reaches 0.898
    assert sample_size_search(template, 0.9, step=5, n_max=300) == 185
    assert 150 < sample_size_search(template, 0.85, step=1, n_min=150, n_max=300) < 160


def test_sample_size_search_unreachable(single_look):
    with pytest.raises(DesignError, match="not reached"):
        sample_size_search(single_look(), 0.99, step=5, n_max=50)
    with pytest.raises(DomainError):
        sample_size_search(single_look(), 0.01)
    with pytest.raises(DomainError):
        sample_size_search(single_look(), 0.9, n_min=0)
    with pytest.raises(DomainError):
        sample_size_search(single_look(), 0.9, decimals=-1)


def test_schoenfeld_events():
    assert schoenfeld_events(0.5) == pytest.approx(87.5, abs=0.1)
    with pytest.raises(DomainError):
        schoenfeld_events(1.0)


def test_power_table(single_look):
    table = power_table(single_look(), [150, 165], GridSettings(refine=False))

    assert list(table["n_per_arm"]) == [150, 165]
    assert table["power"].is_monotonic_increasing
    assert table["null_power"].iloc[0] == pytest.approx(0.025, abs=1e-6)


def test_events_curve(delay_design):
    curve = events_curve(delay_design)

    assert curve["time"].iloc[-1] == 21.0
    assert curve["events"].is_monotonic_increasing
    assert curve["events"].iloc[-1] == pytest.approx(expected_events(delay_design, 21.0)[2])


def test_scenario_validation(control_model, uniform_recruitment):
    with pytest.raises(DomainError):
        DesignScenario(control_model, control_model, 100, uniform_recruitment)
    with pytest.raises(DomainError):
        DesignScenario(control_model, control_model, 100, uniform_recruitment, calendar_times=(16.0, 11.0))
    with pytest.raises(DomainError):
        PlannedSpending("hsd", 0.0)
