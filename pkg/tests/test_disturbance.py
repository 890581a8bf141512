"""Threshold calibration, contribution scaling, and damage accrual."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pudsim import SubarrayLayout, sample_thresholds
from pudsim.disturbance import (
    COMRA,
    REGIONS,
    RH,
    SIMRA,
    ChipProfile,
    DisturbanceState,
    accumulate,
    classify_region,
    contribution,
    flip_direction,
)
from pudsim.dram import KIND_COMRA, KIND_RH, KIND_SIMRA, HammerEffect, RefreshEffect
from pudsim.errors import ConfigError


def flat_profile(**thresholds):
    """Zero-variance profile: min == mean, no data/temp/t_on scaling."""
    th = {k: (v, v) for k, v in thresholds.items()} or {RH: (1000.0, 1000.0)}
    return ChipProfile(
        name="flat",
        thresholds=th,
        temp_step={RH: 1.0, COMRA: 1.0, SIMRA: 1.0},
        t_on_anchors={},
        dp_mult={},
        simra_n32_mult=1.0,
    )


# -- regions -----------------------------------------------------------------


def test_region_labels_in_order():
    extent = (0, 100)
    assert classify_region(0, extent) == "Beginning"
    assert classify_region(55, extent) == "Middle"
    assert classify_region(99, extent) == "End"


@given(st.integers(min_value=5, max_value=400))
def test_region_partition_within_one_of_fifth(count):
    counts = {r: 0 for r in REGIONS}
    for row in range(count):
        counts[classify_region(row, (0, count))] += 1
    ideal = count / 5
    assert all(abs(c - ideal) <= 1 for c in counts.values())


# -- contribution scaling -----------------------------------------------------


def test_contribution_base_rates(profile):
    assert contribution(RH, None, 80.0, 36.0, 1, profile) == 1.0
    assert contribution(COMRA, None, 80.0, 36.0, 1, profile) == 10.0
    assert contribution(SIMRA, None, 80.0, 36.0, 1, profile) == 200.0


def test_contribution_blast_decay(profile):
    near = contribution(RH, None, 80.0, 36.0, 1, profile)
    far = contribution(RH, None, 80.0, 36.0, 2, profile)
    assert far == pytest.approx(near * profile.blast_decay)


def test_temperature_scaling_is_per_kind(profile):
    hot = contribution(SIMRA, None, 90.0, 36.0, 1, profile)
    ref = contribution(SIMRA, None, 80.0, 36.0, 1, profile)
    assert hot / ref == pytest.approx(profile.temp_step[SIMRA])
    # rowhammer on this module is far less temperature sensitive
    assert contribution(RH, None, 90.0, 36.0, 1, profile) / contribution(
        RH, None, 80.0, 36.0, 1, profile
    ) == pytest.approx(profile.temp_step[RH])


@given(st.floats(min_value=36.0, max_value=70200.0))
def test_t_on_factor_monotone_between_anchors(t_on):
    prof = ChipProfile(name="x", thresholds={RH: (10, 20)})
    lo = prof.t_on_factor(RH, 36.0)
    hi = prof.t_on_factor(RH, 70200.0)
    val = prof.t_on_factor(RH, t_on)
    assert lo <= val <= hi


def test_t_on_factor_clamps_outside_anchors():
    prof = ChipProfile(name="x", thresholds={RH: (10, 20)})
    assert prof.t_on_factor(RH, 1.0) == prof.t_on_factor(RH, 36.0)
    assert prof.t_on_factor(RH, 1e9) == prof.t_on_factor(RH, 70200.0)


def test_group_size_factor_reference_and_ratio(profile):
    assert profile.simra_n_factor(32) == pytest.approx(1.0)
    ratio = profile.simra_n_factor(32) / profile.simra_n_factor(2)
    assert ratio == pytest.approx(profile.simra_n32_mult)
    sizes = [2, 4, 8, 16, 32]
    factors = [profile.simra_n_factor(n) for n in sizes]
    assert factors == sorted(factors)


def test_wcdp_picks_strongest_byte(profile):
    assert profile.wcdp(SIMRA) == 0x00
    assert profile.wcdp(RH) in (0x55, 0xAA)


def test_flip_directions_oppose_by_default(profile):
    assert flip_direction(RH, profile) != flip_direction(SIMRA, profile)


def test_flip_direction_strict_requires_configuration():
    prof = ChipProfile(name="x", flip_direction={})
    assert flip_direction(RH, prof) == "1to0"
    with pytest.raises(ConfigError):
        flip_direction(RH, prof, strict=True)


def test_profile_rejects_bad_thresholds():
    with pytest.raises(ConfigError):
        ChipProfile(name="x", thresholds={RH: (100.0, 50.0)})
    with pytest.raises(ConfigError):
        ChipProfile(name="x", thresholds={"bogus": (1.0, 2.0)})


# -- threshold sampling --------------------------------------------------------


def test_zero_variance_profile_is_exact():
    layout = SubarrayLayout.uniform(256, 64)
    prof = flat_profile(rh=1000.0)
    ts = sample_thresholds(prof, layout, seed=1)
    assert np.allclose(ts.hc(RH, prof), 1000.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sampled_population_hits_min_and_mean(profile, seed):
    layout = SubarrayLayout.uniform(4096, 512)
    ts = sample_thresholds(profile, layout, seed)
    for kind, (lo, mean) in profile.thresholds.items():
        hc = ts.hc(kind, profile)
        assert hc.min() == pytest.approx(lo, rel=1e-9)
        assert hc.mean() == pytest.approx(mean, rel=1e-9)
        assert (hc > 0).all()


def test_sampling_is_deterministic_per_seed(profile, layout):
    a = sample_thresholds(profile, layout, seed=5)
    b = sample_thresholds(profile, layout, seed=5)
    c = sample_thresholds(profile, layout, seed=6)
    for kind in a.theta:
        assert np.array_equal(a.theta[kind], b.theta[kind])
        assert not np.array_equal(a.theta[kind], c.theta[kind])
    assert np.array_equal(a.weak_bit, b.weak_bit)


def test_region_multiplier_scales_thresholds():
    layout = SubarrayLayout.uniform(100, 100)
    prof = flat_profile(rh=1000.0)
    prof.region_mult["End"] = 0.5
    ts = sample_thresholds(prof, layout, seed=0)
    hc = ts.hc(RH, prof)
    assert np.allclose(hc[:20], 1000.0)
    assert np.allclose(hc[80:], 500.0)


# -- damage accrual ------------------------------------------------------------


def hammer(row, kind=KIND_RH, t_on=36.0, time=1.0, aggressors=None):
    return HammerEffect(kind, aggressors or (row,), t_on, time)


def test_double_sided_flips_at_half_threshold():
    # theta 1000 units, both neighbors activated: 2 units per pair
    layout = SubarrayLayout.uniform(16, 16)
    prof = flat_profile(rh=500.0)  # 500 pairs * 2 units = 1000 units
    ts = sample_thresholds(prof, layout, seed=0)
    state = DisturbanceState(rows=16)
    for i in range(499):
        accumulate(state, [hammer(4, time=i + 1), hammer(6, time=i + 1.5)], ts, prof)
    assert not state.flips
    accumulate(state, [hammer(4, time=1000), hammer(6, time=1000.5)], ts, prof)
    assert [f.row for f in state.flips] == [5]
    assert state.flips[0].direction == "1to0"


def test_group_op_min_distance_single_deposit():
    layout = SubarrayLayout.uniform(16, 16)
    prof = flat_profile(simra=3.0)  # 3 ops of 200 units against 600 units
    ts = sample_thresholds(prof, layout, seed=0)
    state = DisturbanceState(rows=16)
    grp = tuple(range(4, 8))
    for i in range(3):
        accumulate(state, [hammer(None, KIND_SIMRA, aggressors=grp, time=i + 1)], ts, prof)
    assert {f.row for f in state.flips} == {3, 8}
    assert all(f.direction == "0to1" for f in state.flips)


def test_refresh_restores_victim():
    layout = SubarrayLayout.uniform(16, 16)
    prof = flat_profile(rh=10.0)
    ts = sample_thresholds(prof, layout, seed=0)
    state = DisturbanceState(rows=16)
    for i in range(15):
        accumulate(state, [hammer(4, time=i + 1)], ts, prof)
        accumulate(state, [RefreshEffect(rows=(3, 5), time=i + 1.5)], ts, prof)
    assert not state.flips
    assert 3 not in state.damage and 5 not in state.damage


def test_mixed_kinds_compose_as_fractions():
    layout = SubarrayLayout.uniform(16, 16)
    prof = flat_profile(rh=10.0, comra=10.0)
    ts = sample_thresholds(prof, layout, seed=0)
    state = DisturbanceState(rows=16)
    # half the budget as activations (theta 20 units), half as copy cycles
    for i in range(10):
        accumulate(state, [hammer(4, time=i + 1)], ts, prof)  # 10 of 20 units
    for i in range(10):
        accumulate(
            state,
            [hammer(None, KIND_COMRA, aggressors=(4, 3), time=100 + i)],
            ts,
            prof,
        )  # comra deposits close the remaining half
    assert any(f.row == 5 for f in state.flips)


def test_bit_escalation_moves_to_next_bit():
    layout = SubarrayLayout.uniform(16, 16)
    prof = flat_profile(rh=1.0)
    ts = sample_thresholds(prof, layout, seed=0)
    state = DisturbanceState(rows=16)
    for i in range(4):
        accumulate(state, [hammer(4, time=i + 1), hammer(6, time=i + 1.5)], ts, prof)
    flips5 = [f for f in state.flips if f.row == 5]
    assert len(flips5) > 1
    assert len({f.bit for f in flips5}) == len(flips5)  # distinct bits


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=200), st.integers(min_value=0, max_value=40))
def test_flip_iff_budget_reaches_threshold(theta, hammers):
    """Dual route: simulated accrual vs the closed-form unit count."""
    layout = SubarrayLayout.uniform(8, 8)
    prof = flat_profile(rh=float(theta))
    ts = sample_thresholds(prof, layout, seed=0)
    state = DisturbanceState(rows=8)
    for i in range(hammers):
        accumulate(state, [hammer(3, time=i + 1), hammer(5, time=i + 1.5)], ts, prof)
    expected = 2 * hammers >= 2 * theta
    assert bool(any(f.row == 4 for f in state.flips)) == expected
