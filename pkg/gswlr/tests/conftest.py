import math

import pytest

from gswlr.counting import Cohort, SubjectRecord
from gswlr.design import DesignScenario, PlannedSpending
from gswlr.survival_models import PiecewiseExponential, PowerRecruitment
from gswlr.wlrt import LogRank, ModestWeight


@pytest.fixture()
def hand_cohort():
    # arm 0: events at 1 and 2; arm 1: event at 1.5, censored at 3
    return Cohort.from_records([
        SubjectRecord(0.0, 1.0, True, 0),
        SubjectRecord(0.0, 2.0, True, 0),
        SubjectRecord(0.0, 1.5, True, 1),
        SubjectRecord(0.0, 3.0, False, 1),
    ])


@pytest.fixture()
def control_model():
    return PiecewiseExponential.from_medians([8])


@pytest.fixture()
def delay_model():
    return PiecewiseExponential((4.0,), (math.log(2) / 8, math.log(2) / 16.6))


@pytest.fixture()
def ph_model():
    return PiecewiseExponential.from_medians([12.3])


@pytest.fixture()
def uniform_recruitment():
    return PowerRecruitment(8.0)


@pytest.fixture()
def delay_design(control_model, delay_model, uniform_recruitment):
    """Modestly weighted (t*=6) three-stage design, 150 per arm, 4 month delay."""
    return DesignScenario(
        control=control_model,
        experimental=delay_model,
        n_per_arm=150,
        recruitment=uniform_recruitment,
        scheme=ModestWeight(6.0),
        calendar_times=(11.0, 16.0, 21.0),
        spending=PlannedSpending("hsd", -4.0),
    )


@pytest.fixture()
def single_look(control_model, ph_model, uniform_recruitment):
    def make(experimental=None, scheme=LogRank(), n_per_arm=165):
        return DesignScenario(
            control=control_model,
            experimental=ph_model if experimental is None else experimental,
            n_per_arm=n_per_arm,
            recruitment=uniform_recruitment,
            scheme=scheme,
            calendar_times=(21.0,),
        )
    return make
