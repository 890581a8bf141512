"""Window-level bypass evaluator pinned to the bus-event reference."""

import pytest

from pudsim import (
    Experiment,
    PatternSpec,
    SimraGroupMap,
    SubarrayLayout,
    TimingParams,
    load_profile,
)
from pudsim.mitigation import TrrConfig
from pudsim.patterns import gen_nsided_bypass
from pudsim.trreval import make_rh_setup, make_simra_setup, run_bypass

TIMING = TimingParams()
OPS_PER_WINDOW = TIMING.acts_per_refi


@pytest.fixture(scope="module")
def chip(worstcase):
    layout = SubarrayLayout.uniform(2048, 256)
    groups = SimraGroupMap.aligned_blocks(layout, 32)
    return Experiment(worstcase, layout, groups, seed=11)


def reference_flips(exp, setup, agg_windows, technique, n=2):
    """Route B: materialize the full bus stream and run the bank model."""
    per_aggr = OPS_PER_WINDOW // (2 if technique == "simra" else 1)
    per_aggr //= len(setup.aggressors)
    spec = PatternSpec(
        kind="nsided",
        aggressors=setup.aggressors,
        hammers=per_aggr * agg_windows,
        technique=technique,
        n=n,
        dummy_rows=tuple(range(1024, 1184)),
    )
    stream = gen_nsided_bypass(spec, exp.timing)
    state, _ = exp.run_stream(stream.events)
    return state


def windows_in(agg_windows):
    # the generator stops after the aggressor quota: k aggressor windows
    # with three decoy windows between each pair
    return 4 * (agg_windows - 1) + 1


@pytest.mark.parametrize("agg_windows", [2, 6])
def test_rh_routes_agree_without_trr(chip, agg_windows):
    setup = make_rh_setup(pairs=4)
    fast = run_bypass(
        setup, chip.profile, chip.thresholds, chip.layout,
        trr=None, seed=0, windows=windows_in(agg_windows), timing=chip.timing,
    )
    state = reference_flips(chip, setup, agg_windows, "rh")
    for victim, flips in fast.per_victim.items():
        ref = len([f for f in state.flips if f.row == victim])
        assert flips == ref, f"victim {victim}: fast {flips} vs bus {ref}"


@pytest.mark.parametrize("agg_windows", [2, 4])
def test_simra_routes_agree_without_trr(chip, agg_windows):
    setup = make_simra_setup(chip.groups, n=32, count=4)
    fast = run_bypass(
        setup, chip.profile, chip.thresholds, chip.layout,
        trr=None, seed=0, windows=windows_in(agg_windows), timing=chip.timing,
    )
    state = reference_flips(chip, setup, agg_windows, "simra", n=32)
    for victim, flips in fast.per_victim.items():
        ref = len([f for f in state.flips if f.row == victim])
        assert flips == ref, f"victim {victim}: fast {flips} vs bus {ref}"


def test_trr_suppresses_rh_but_not_simra(chip):
    windows = 8204
    results = {}
    for tech in ("rh", "simra"):
        setup = (
            make_rh_setup(pairs=4)
            if tech == "rh"
            else make_simra_setup(chip.groups, n=32, count=4)
        )
        off = run_bypass(setup, chip.profile, chip.thresholds, chip.layout,
                         trr=None, seed=5, windows=windows, timing=chip.timing)
        on = run_bypass(setup, chip.profile, chip.thresholds, chip.layout,
                        trr=TrrConfig(), seed=5, windows=windows, timing=chip.timing)
        assert off.bitflips > 0
        results[tech] = (off.bitflips, on.bitflips)
    rh_off, rh_on = results["rh"]
    si_off, si_on = results["simra"]
    assert rh_on <= 0.05 * rh_off
    assert si_off - si_on <= 0.30 * si_off


def test_bypass_is_deterministic_per_seed(chip):
    setup = make_rh_setup(pairs=2)
    kw = dict(trr=TrrConfig(), windows=2000, timing=chip.timing)
    a = run_bypass(setup, chip.profile, chip.thresholds, chip.layout, seed=1, **kw)
    b = run_bypass(setup, chip.profile, chip.thresholds, chip.layout, seed=1, **kw)
    c = run_bypass(setup, chip.profile, chip.thresholds, chip.layout, seed=2, **kw)
    assert a.bitflips == b.bitflips and a.per_victim == b.per_victim
    assert (a.bitflips, a.trr_refreshes) != (c.bitflips, c.trr_refreshes)


def test_simra_setup_uses_interior_bus_rows(chip):
    setup = make_simra_setup(chip.groups, n=32, count=4)
    for bus_row in setup.aggressors:
        members = sorted(setup.groups[bus_row])
        assert members[0] < bus_row < members[-1]
