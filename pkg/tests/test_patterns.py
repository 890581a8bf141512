"""Pattern generators and the command-trace text format."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pudsim import (
    Bank,
    Geometry,
    PatternSpec,
    SimraGroupMap,
    SubarrayLayout,
    TimingParams,
    events_to_trace,
    parse_trace,
)
from pudsim.dram import CopyEffect, GroupOverwrite
from pudsim.errors import ConfigError
from pudsim.patterns import (
    gen_comra,
    gen_nsided_bypass,
    gen_rowhammer,
    gen_simra,
    resolve_simra_pair,
)

TIMING = TimingParams()


def apply_stream(events, rows=64, groups_n=None, sub_rows=32):
    geom = Geometry(rows=rows, row_bytes=4)
    layout = SubarrayLayout.uniform(rows, sub_rows)
    groups = SimraGroupMap.aligned_blocks(layout, groups_n) if groups_n else None
    bank = Bank(geom, TIMING, layout, groups)
    effects = []
    for e in events:
        effects.extend(bank.apply(e))
    effects.extend(bank.flush())
    return bank, effects


# -- generators ---------------------------------------------------------------


def test_rowhammer_stream_has_one_act_pre_per_aggressor():
    spec = PatternSpec(kind="rowhammer", aggressors=(10, 12), hammers=3)
    s = gen_rowhammer(spec, TIMING)
    assert len(s.events) == 3 * 2 * 2
    kinds = [e.kind for e in s.events]
    assert kinds == ["ACT", "PRE"] * 6


def test_rowpress_stream_holds_rows_open_longer():
    spec = PatternSpec(kind="rowpress", aggressors=(10, 12), hammers=1, t_aggon=7800.0)
    s = gen_rowhammer(spec, TIMING)
    act, pre = s.events[0], s.events[1]
    assert pre.time - act.time == pytest.approx(7800.0)


def test_comra_stream_copies_when_applied():
    spec = PatternSpec(kind="comra", aggressors=(5, 6), hammers=2)
    s = gen_comra(spec, TIMING)
    bank, effects = apply_stream(s.events)
    copies = [e for e in effects if isinstance(e, CopyEffect)]
    assert [(c.src, c.dst) for c in copies] == [(5, 6), (5, 6)]


def test_reversed_copy_swaps_direction():
    spec = PatternSpec(kind="comra", aggressors=(5, 6), hammers=1, reversed_copy=True)
    s = gen_comra(spec, TIMING)
    _, effects = apply_stream(s.events)
    copies = [e for e in effects if isinstance(e, CopyEffect)]
    assert [(c.src, c.dst) for c in copies] == [(6, 5)]


def test_comra_rejects_non_violating_gap():
    spec = PatternSpec(kind="comra", aggressors=(5, 6), pre_act_gap=14.0)
    with pytest.raises(ConfigError):
        gen_comra(spec, TIMING)


def test_simra_stream_opens_whole_group():
    spec = PatternSpec(kind="simra", aggressors=(9, 9), hammers=2, n=4)
    s = gen_simra(spec, TIMING)
    _, effects = apply_stream(s.events, groups_n=4)
    ows = [e for e in effects if isinstance(e, GroupOverwrite)]
    assert len(ows) == 2
    assert set(ows[0].rows) == {8, 9, 10, 11}


def test_resolve_simra_pair_uses_group_map():
    layout = SubarrayLayout.uniform(64, 32)
    groups = SimraGroupMap.aligned_blocks(layout, 8)
    r1, r2 = resolve_simra_pair(groups, 12)
    assert groups.group(r1, r2) is not None


def test_generator_rejects_wrong_aggressor_count():
    with pytest.raises(ConfigError):
        PatternSpec(kind="comra", aggressors=(1, 2, 3))
    with pytest.raises(ConfigError):
        PatternSpec(kind="simra", aggressors=(1, 2), n=3)


# -- bypass schedule -----------------------------------------------------------


def test_nsided_window_structure():
    spec = PatternSpec(
        kind="nsided",
        aggressors=(8, 10, 16, 18),
        hammers=30,
        technique="rh",
        dummy_rows=tuple(range(100, 140)),
    )
    s = gen_nsided_bypass(spec, TIMING)
    refs = [e for e in s.events if e.kind == "REF"]
    acts = [e for e in s.events if e.kind == "ACT"]
    assert len(refs) >= 4
    # every refresh window carries exactly acts_per_refi activations
    by_window = {}
    for a in acts:
        by_window.setdefault(int(a.time // TIMING.t_refi), 0)
        by_window[int(a.time // TIMING.t_refi)] += 1
    last_agg = max(w for w in by_window if w % 4 == 0)
    for w, count in by_window.items():
        if w == last_agg:
            assert count <= TIMING.acts_per_refi  # budget met mid-window
        else:
            assert count == TIMING.acts_per_refi
    # aggressor windows touch only aggressors; decoys only dummies
    for a in acts:
        w = int(a.time // TIMING.t_refi)
        if w % 4 == 0:
            assert a.row in spec.aggressors
        else:
            assert a.row in spec.dummy_rows


def test_nsided_round_robin_resets_each_window():
    spec = PatternSpec(
        kind="nsided",
        aggressors=(8, 10),
        hammers=200,
        technique="rh",
        dummy_rows=tuple(range(100, 140)),
    )
    s = gen_nsided_bypass(spec, TIMING)
    agg_acts = [e for e in s.events if e.kind == "ACT" and e.row in (8, 10)]
    windows = {}
    for a in agg_acts:
        windows.setdefault(int(a.time // TIMING.t_refi), []).append(a.row)
    for rows in windows.values():
        assert rows[0] == 8  # the split restarts at the first aggressor


# -- trace format ---------------------------------------------------------------


def test_trace_round_trip():
    spec = PatternSpec(kind="comra", aggressors=(5, 6), hammers=3)
    events = gen_comra(spec, TIMING).events
    text = events_to_trace(events)
    assert parse_trace(text) == events


@settings(max_examples=30)
@given(st.binary(min_size=1, max_size=8))
def test_trace_round_trip_preserves_payload(payload):
    from pudsim.dram import CommandEvent

    events = [
        CommandEvent(1.0, "ACT", 0, 5),
        CommandEvent(2.0, "WR", 0, 5, payload),
        CommandEvent(40.0, "PRE", 0),
    ]
    assert parse_trace(events_to_trace(events)) == events


def test_trace_parse_reports_line_numbers():
    with pytest.raises(ConfigError, match=":2:"):
        parse_trace("1.0 ACT 0 5\nnot a command\n")
