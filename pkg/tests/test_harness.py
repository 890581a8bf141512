"""First-flip search, reverse-engineering probes, and sweep plumbing."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pudsim import (
    BisectionConfig,
    Experiment,
    PatternSpec,
    SimraGroupMap,
    SubarrayLayout,
    find_hcfirst,
)
from pudsim.disturbance import RH, ChipProfile
from pudsim.errors import ConfigError
from pudsim.harness import (
    ExperimentResult,
    RESULT_COLUMNS,
    SweepGrid,
    default_cap,
    discover_simra_groups,
    discover_subarrays,
    random_layout_and_groups,
    run_combined,
    run_sweep,
)


def flat_experiment(theta, rows=64):
    prof = ChipProfile(
        name="flat",
        thresholds={RH: (float(theta), float(theta))},
        temp_step={RH: 1.0},
        t_on_anchors={},
        dp_mult={},
    )
    layout = SubarrayLayout.uniform(rows, rows)
    return Experiment(prof, layout, seed=0)


def linear_scan(exp, spec, victim, cap):
    """Brute-force oracle: smallest hammer count that flips the victim."""
    per = exp.hammer_damage(spec).get(victim, 0.0)
    if per <= 0:
        return None
    for n in range(1, cap + 1):
        if n * per >= 1.0 - 1e-12:
            return n
    return None


@pytest.mark.parametrize("theta", [7, 123, 1000])
def test_bisection_matches_linear_scan(theta):
    exp = flat_experiment(theta)
    spec = PatternSpec(kind="rowhammer", aggressors=(20, 22))
    cfg = BisectionConfig(tolerance=0.01, cap=4096)
    found = find_hcfirst(spec, 21, exp, cfg)
    oracle = linear_scan(exp, spec, 21, 4096)
    assert found is not None and oracle is not None
    assert abs(found - oracle) <= max(1, 0.01 * oracle)


def test_bisection_reports_no_flip_distinctly():
    exp = flat_experiment(10**9)
    spec = PatternSpec(kind="rowhammer", aggressors=(20, 22))
    assert find_hcfirst(spec, 21, exp, BisectionConfig(cap=1000)) is None


def test_bisection_result_never_below_true_threshold():
    exp = flat_experiment(500)
    spec = PatternSpec(kind="rowhammer", aggressors=(20, 22))
    found = find_hcfirst(spec, 21, exp, BisectionConfig(cap=4096))
    per = exp.hammer_damage(spec)[21]
    assert found * per >= 1.0 - 1e-9


def test_default_cap_is_one_refresh_window_of_pairs(experiment):
    cap = default_cap(experiment.timing)
    assert cap == experiment.timing.acts_per_refi * experiment.timing.refs_per_refw // 2


def test_untouched_victim_reports_no_flip(experiment):
    spec = PatternSpec(kind="rowhammer", aggressors=(100, 102))
    assert find_hcfirst(spec, 400, experiment, BisectionConfig(cap=200)) is None


# -- reverse engineering ---------------------------------------------------------


def test_discovery_recovers_configured_ground_truth(experiment):
    bank = experiment.fresh_bank("re")
    layout = discover_subarrays(bank)
    assert layout == experiment.layout
    groups = discover_simra_groups(bank, layout)
    assert groups == experiment.groups


def test_discovery_on_two_subarrays_of_eight_rows(profile):
    layout = SubarrayLayout.uniform(16, 8)
    groups = SimraGroupMap.aligned_blocks(layout, 4)
    exp = Experiment(profile, layout, groups, seed=1)
    bank = exp.fresh_bank()
    assert discover_subarrays(bank) == layout
    assert discover_simra_groups(bank, layout) == groups


def test_discovery_preserves_stored_data(experiment):
    bank = experiment.fresh_bank()
    bank.set_row_data(5, b"\xde\xad\xbe\xef")
    bank.set_row_data(300, b"\x01\x02\x03\x04")
    discover_simra_groups(bank, discover_subarrays(bank))
    assert bank.row_data(5) == (b"\xde\xad\xbe\xef" + bank.row_data(5)[4:])
    assert bank.row_data(300)[:4] == b"\x01\x02\x03\x04"


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_random_layouts_recovered_exactly(seed):
    layout, groups = random_layout_and_groups(256, seed)
    prof = ChipProfile(name="x", thresholds={RH: (10.0, 20.0)})
    exp = Experiment(prof, layout, groups, seed=seed)
    bank = exp.fresh_bank()
    found_layout = discover_subarrays(bank)
    assert found_layout == layout
    assert discover_simra_groups(bank, found_layout) == groups


# -- sweeps ------------------------------------------------------------------------


def test_sweep_produces_schema_rows(worstcase, layout, groups):
    grid = SweepGrid(kinds=("rowhammer", "simra"), ns=(32,))
    res = run_sweep(grid, worstcase, layout, groups, seed=1, per_subarray=1)
    assert res.rows and not res.failures
    for row in res.rows:
        assert tuple(row.keys()) == tuple(RESULT_COLUMNS)
    kinds = {r["kind"] for r in res.rows}
    assert kinds == {"rowhammer", "simra"}


def test_sweep_records_failures_instead_of_raising(worstcase, layout):
    grid = SweepGrid(kinds=("simra",), ns=(32,))
    res = run_sweep(grid, worstcase, layout, groups=None, seed=1)
    assert res.failures and not res.rows


def test_aggregate_and_csv(worstcase, layout, groups):
    grid = SweepGrid(kinds=("simra",), ns=(32,))
    res = run_sweep(grid, worstcase, layout, groups, seed=1, per_subarray=1)
    agg = res.aggregate()
    assert agg["min"] <= agg["p50"] <= agg["max"]
    header = res.to_csv().splitlines()[0]
    assert header == ",".join(RESULT_COLUMNS)


def test_combined_pattern_beats_rowhammer_alone(worstcase, layout, groups):
    exp = Experiment(worstcase, layout, groups, seed=3)
    victim = 64  # adjacent to the first 32-row group
    out = run_combined(
        exp,
        victim,
        fractions={"simra": 0.5, "comra": 0.0},
        comra_rows=(65, 66),
        simra_rows=(32, 32),
        simra_n=32,
        search=BisectionConfig(cap=default_cap(exp.timing)),
    )
    rh_spec = PatternSpec(kind="rowhammer", aggressors=(63, 65))
    rh_only = find_hcfirst(rh_spec, 64, exp, BisectionConfig())
    assert out is not None and rh_only is not None
    assert out["total"] < rh_only
