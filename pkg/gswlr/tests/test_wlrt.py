import math

import numpy as np
import pytest

from gswlr.counting import Cohort, build_risk_table, km_pooled
from gswlr.errors import DegenerateVarianceError, DomainError
from gswlr.wlrt import (FlemingHarrington01, LogRank, ModestWeight, compute_weights, parse_scheme,
                        weighted_logrank, wlr_test)


def table_and_km(cohort):
    table = build_risk_table(cohort)
    return table, km_pooled(table, len(cohort))


def oracle(time, event, arm, t_star):
    """Direct summation over 2x2 tables, modest weights from a hand-rolled pooled KM."""
    event_times = sorted(set(t for t, e in zip(time, event) if e))
    surv = 1.0
    left = []
    for t in event_times:
        left.append(surv)
        n = sum(1 for x in time if x >= t)
        d = sum(1 for x, e in zip(time, event) if e and x == t)
        surv *= 1.0 - d / n
    s_star = 1.0
    running = 1.0
    for t, s_before in zip(event_times, left):
        if t > t_star:
            break
        n = sum(1 for x in time if x >= t)
        d = sum(1 for x, e in zip(time, event) if e and x == t)
        running = s_before * (1.0 - d / n)
        s_star = running

    u = v = 0.0
    for t, s_before in zip(event_times, left):
        w = 1.0 / max(s_before, s_star)
        n0 = sum(1 for x, g in zip(time, arm) if g == 0 and x >= t)
        n1 = sum(1 for x, g in zip(time, arm) if g == 1 and x >= t)
        o1 = sum(1 for x, e, g in zip(time, event, arm) if g == 1 and e and x == t)
        o = sum(1 for x, e in zip(time, event) if e and x == t)
        n = n0 + n1
        u += w * (o1 - o * n1 / n)
        if n > 1:
            v += w * w * n0 * n1 * o * (n - o) / (n * n * (n - 1))
    return u, v


def test_logrank_hand_example(hand_cohort):
    table, km = table_and_km(hand_cohort)
    result = weighted_logrank(table, compute_weights(table, km, LogRank()))

    assert result.u == pytest.approx(-2 / 3, abs=1e-12)
    assert result.v == pytest.approx(0.25 + 2 / 9 + 0.25, abs=1e-12)
    assert result.z == pytest.approx(-0.7845, abs=1e-4)
    assert result.z * math.sqrt(result.v) == pytest.approx(result.u, abs=1e-10)
    assert result.n_events == 3


def test_modest_weights_hand_example(hand_cohort):
    table, km = table_and_km(hand_cohort)

    assert compute_weights(table, km, ModestWeight(5.0)) == pytest.approx([1.0, 4 / 3, 2.0])
    assert compute_weights(table, km, ModestWeight(0.0)).tolist() == [1.0, 1.0, 1.0]


def test_fh01_weights_hand_example(hand_cohort):
    table, km = table_and_km(hand_cohort)

    assert compute_weights(table, km, FlemingHarrington01()) == pytest.approx([0.0, 0.25, 0.5])


def test_modest_zero_equals_logrank():
    rng = np.random.default_rng(3)
    cohort = Cohort.from_followup(rng.exponential(5.0, 50), rng.random(50) < 0.8, rng.integers(0, 2, 50))
    a = wlr_test(cohort, ModestWeight(0.0))
    b = wlr_test(cohort, LogRank())

    assert a.u == b.u
    assert a.v == b.v


def test_swapping_arms_negates_u():
    rng = np.random.default_rng(5)
    cohort = Cohort.from_followup(rng.exponential(5.0, 40), rng.random(40) < 0.8, rng.integers(0, 2, 40))
    table, km = table_and_km(cohort)
    w = compute_weights(table, km, ModestWeight(3.0))
    a = weighted_logrank(table, w)
    b = weighted_logrank(table.swap_arms(), w)

    assert b.u == pytest.approx(-a.u, abs=1e-12)
    assert b.v == pytest.approx(a.v, abs=1e-12)


def test_mirrored_arms_give_zero_score():
    times = [1.0, 2.0, 3.0, 4.0]
    cohort = Cohort.from_followup(times * 2, [True] * 8, [0] * 4 + [1] * 4)

    assert wlr_test(cohort, ModestWeight(2.0)).u == pytest.approx(0.0, abs=1e-12)


def test_modest_weight_bounds():
    rng = np.random.default_rng(9)
    cohort = Cohort.from_followup(rng.exponential(5.0, 80), rng.random(80) < 0.9, rng.integers(0, 2, 80))
    table, km = table_and_km(cohort)
    w = compute_weights(table, km, ModestWeight(4.0))

    assert np.all(w >= 1.0)
    assert np.all(w <= 1.0 / km.at(4.0) + 1e-12)


def test_against_brute_force_oracle():
    rng = np.random.default_rng(20211)
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(2, 41))
        time = np.round(rng.exponential(4.0, n), 1) + 0.1
        event = rng.random(n) < 0.75
        arm = rng.integers(0, 2, n)
        if not event.any():
            continue
        t_star = float(rng.choice([0.0, 1.0, 3.0, 6.0]))
        u, v = oracle(time.tolist(), event.tolist(), arm.tolist(), t_star)
        table, km = table_and_km(Cohort.from_followup(time, event, arm))
        w = compute_weights(table, km, ModestWeight(t_star))
        if v == 0:
            with pytest.raises(DegenerateVarianceError):
                weighted_logrank(table, w)
            continue
        result = weighted_logrank(table, w)
        assert result.u == pytest.approx(u, abs=1e-10)
        assert result.v == pytest.approx(v, abs=1e-10)
        checked += 1

    assert checked > 800


def test_null_rejection_rate():
    rng = np.random.default_rng(123)
    n_rep, n = 5000, 100
    rejections = {"logrank": 0, "modest": 0}
    for _ in range(n_rep):
        time = rng.exponential(10.0, 2 * n)
        censor = rng.uniform(5.0, 25.0, 2 * n)
        cohort = Cohort.from_followup(np.minimum(time, censor), time <= censor, np.repeat([0, 1], n))
        rejections["logrank"] += wlr_test(cohort, LogRank()).z < -1.959964
        rejections["modest"] += wlr_test(cohort, ModestWeight(6.0)).z < -1.959964

    se = math.sqrt(0.025 * 0.975 / n_rep)
    for count in rejections.values():
        assert abs(count / n_rep - 0.025) < 3 * se


def test_degenerate_variance():
    cohort = Cohort.from_followup([1.0, 2.0], [True, True], [0, 0])

    with pytest.raises(DegenerateVarianceError):
        wlr_test(cohort, LogRank())


def test_parse_scheme():
    assert parse_scheme("logrank") == LogRank()
    assert parse_scheme("FH01") == FlemingHarrington01()
    assert parse_scheme("modest", 6) == ModestWeight(6.0)
    with pytest.raises(DomainError):
        parse_scheme("modest")
    with pytest.raises(DomainError):
        parse_scheme("maxcombo")
    with pytest.raises(DomainError):
        ModestWeight(-1.0)
