"""Charge-disturbance model: per-row flip thresholds and damage accrual.

Each victim row has one threshold per disturbance kind, expressed in
effective hammer units (one nominal aggressor activation at reference
conditions = 1 unit).  Disturbing events add units scaled by data
pattern, temperature, aggressor-on time, and distance; a row's state is
its accrued damage *fraction* toward the kind-specific threshold, so
different access patterns compose additively.  A bit flips when the
fraction reaches 1; further bits on the same row need 5% more each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .dram import KIND_COMRA, KIND_RH, KIND_SIMRA, SubarrayLayout
from .errors import CalibrationError, ConfigError
from .rng import stable_hash, substream

# profile-level kind names (effect kinds map onto these)
RH = "rh"
COMRA = "comra"
SIMRA = "simra"
KINDS = (RH, COMRA, SIMRA)

EFFECT_KIND = {KIND_RH: RH, KIND_COMRA: COMRA, KIND_SIMRA: SIMRA}

T_REF_C = 80.0
T_ON_REF_NS = 36.0

REGIONS = ("Beginning", "Beginning-Middle", "Middle", "Middle-End", "End")


def classify_region(row: int, extent: tuple[int, int]) -> str:
    """Five proportional bins across a subarray extent."""
    start, count = extent
    idx = row - start
    if not 0 <= idx < count:
        raise ConfigError(f"row {row} outside extent {extent}")
    return REGIONS[min(4, idx * 5 // count)]


@dataclass
class ChipProfile:
    """Vulnerability profile of one DRAM module.

    thresholds: per kind, (min, mean) first-flip hammer count over the row
    population, in hammers of that kind (copy cycles / multi-activation
    ops for the violation kinds).  A kind absent from the map is not
    expressible on the module (the simulator reports no flips for it).
    """

    name: str
    vendor: str = ""
    thresholds: dict[str, tuple[float, float]] = field(default_factory=dict)
    base: dict[str, float] = field(
        default_factory=lambda: {RH: 1.0, COMRA: 10.0, SIMRA: 200.0}
    )
    # temperature scaling per +10 C step from 80 C, per kind
    temp_step: dict[str, float] = field(
        default_factory=lambda: {RH: 1.0, COMRA: 1.0, SIMRA: 1.467}
    )
    # aggressor-on-time anchors (t_on ns, multiplier), log-log interpolated
    t_on_anchors: dict[str, tuple[tuple[float, float], ...]] = field(
        default_factory=lambda: {
            RH: ((36.0, 1.0), (144.0, 2.2), (7800.0, 12.0), (70200.0, 31.15)),
            COMRA: ((36.0, 1.0), (144.0, 2.4), (7800.0, 16.0), (70200.0, 45.0)),
            SIMRA: ((36.0, 1.0), (144.0, 3.0), (7800.0, 60.0), (70200.0, 200.0)),
        }
    )
    # data-pattern multiplier by (kind, aggressor byte); absent -> 1.0
    dp_mult: dict[str, dict[int, float]] = field(
        default_factory=lambda: {
            RH: {0x55: 1.0, 0xAA: 1.0, 0x00: 0.8, 0xFF: 0.8},
            COMRA: {0x55: 1.0, 0xAA: 1.0, 0x00: 0.8, 0xFF: 0.8},
            SIMRA: {0x00: 1.0, 0xFF: 0.6, 0x55: 1.0 / 57.8, 0xAA: 1.0 / 57.8},
        }
    )
    blast_decay: float = 0.05  # attenuation per extra row of distance
    max_distance: int = 2
    # group-op strength scaling: ops over 32-row groups are this much more
    # effective than over 2-row groups (log-interpolated in between)
    simra_n32_mult: float = 1.47
    region_mult: dict[str, float] = field(
        default_factory=lambda: {r: 1.0 for r in REGIONS}
    )
    flip_direction: dict[str, str] = field(
        default_factory=lambda: {RH: "1to0", COMRA: "1to0", SIMRA: "0to1"}
    )
    bit_escalation: float = 1.05

    def __post_init__(self):
        for kind, (lo, mean) in self.thresholds.items():
            if kind not in KINDS:
                raise ConfigError(f"unknown disturbance kind {kind!r}")
            if lo <= 0 or mean < lo:
                raise ConfigError(f"{kind}: need 0 < min <= mean, got ({lo}, {mean})")
        for kind, anchors in self.t_on_anchors.items():
            ts = [t for t, _ in anchors]
            ms = [m for _, m in anchors]
            if ts != sorted(ts) or ms != sorted(ms):
                raise ConfigError(f"{kind}: t_on anchors must be non-decreasing")
            if any(m <= 0 for m in ms) or any(t <= 0 for t in ts):
                raise ConfigError(f"{kind}: t_on anchors must be positive")
        if not 0.0 <= self.blast_decay < 1.0:
            raise ConfigError("blast_decay must be in [0, 1)")
        if self.max_distance < 1:
            raise ConfigError("max_distance must be >= 1")
        if self.bit_escalation <= 1.0:
            raise ConfigError("bit_escalation must be > 1")
        if self.simra_n32_mult <= 0:
            raise ConfigError("simra_n32_mult must be positive")
        for kind, d in self.flip_direction.items():
            if d not in ("0to1", "1to0"):
                raise ConfigError(f"flip_direction[{kind}] must be 0to1 or 1to0")
        self._contrib_cache: dict = {}

    def units_per_hammer(self, kind: str) -> float:
        """Effective units one calibration hammer deposits on the reference
        victim: a double-sided pair for activations and copy cycles, one
        op for group activation."""
        if kind == RH:
            return 2.0 * self.base[RH]
        if kind == COMRA:
            return 2.0 * self.base[COMRA]
        if kind == SIMRA:
            return self.base[SIMRA]
        raise ConfigError(f"unknown disturbance kind {kind!r}")

    def temp_factor(self, kind: str, temp_c: float) -> float:
        return self.temp_step.get(kind, 1.0) ** ((temp_c - T_REF_C) / 10.0)

    def t_on_factor(self, kind: str, t_on: float) -> float:
        anchors = self.t_on_anchors.get(kind)
        if not anchors:
            return 1.0
        if t_on <= anchors[0][0]:
            return anchors[0][1]
        if t_on >= anchors[-1][0]:
            return anchors[-1][1]
        for (t0, m0), (t1, m1) in zip(anchors, anchors[1:]):
            if t0 <= t_on <= t1:
                w = (math.log(t_on) - math.log(t0)) / (math.log(t1) - math.log(t0))
                v = math.exp(math.log(m0) * (1 - w) + math.log(m1) * w)
                # exp/log round-trip can overshoot the segment ends by 1 ulp
                return min(max(v, m0), m1)
        raise AssertionError("unreachable")

    def dp_factor(self, kind: str, dp: Optional[int]) -> float:
        if dp is None:
            return 1.0
        return self.dp_mult.get(kind, {}).get(dp & 0xFF, 1.0)

    def simra_n_factor(self, n: int) -> float:
        """Strength multiplier for a group op that activated n rows.

        The calibrated thresholds describe the strongest case (N=32), so
        the factor is 1.0 there and decays geometrically toward N=2,
        where an op is `simra_n32_mult` times weaker.  Keeping the factor
        <= 1 also keeps one op's damage within its counting weight, which
        the back-off security bound relies on.
        """
        if n < 2:
            n = 2  # a degenerate partial activation acts like the smallest group
        return self.simra_n32_mult ** (math.log2(min(n, 32) / 32.0) / 4.0)

    def wcdp(self, kind: str) -> int:
        """Worst-case aggressor byte for the kind (highest multiplier)."""
        table = self.dp_mult.get(kind) or {0x55: 1.0}
        return max(sorted(table), key=lambda b: table[b])


def contribution(
    kind: str,
    dp: Optional[int],
    temp_c: float,
    t_on: float,
    dist: int,
    profile: ChipProfile,
) -> float:
    """Effective units one event of `kind` deposits on a victim at `dist`.

    For activations and copy cycles this is per aggressor row; for a group
    op it is per op, with dist the victim's distance to the nearest group
    member.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown disturbance kind {kind!r}")
    if dist < 1:
        raise ConfigError("distance must be >= 1")
    key = (kind, dp, temp_c, t_on, dist)
    cache = profile._contrib_cache
    hit = cache.get(key)
    if hit is not None:
        return hit
    c = (
        profile.base[kind]
        * profile.dp_factor(kind, dp)
        * profile.temp_factor(kind, temp_c)
        * profile.t_on_factor(kind, t_on)
        * profile.blast_decay ** (dist - 1)
    )
    cache[key] = c
    return c


def flip_direction(kind: str, profile: ChipProfile, strict: bool = False) -> str:
    """Dominant flip direction the profile assigns to a disturbance kind."""
    if kind not in profile.flip_direction:
        if strict:
            raise ConfigError(f"no flip direction configured for {kind!r}")
        return "1to0"
    return profile.flip_direction[kind]


# ---------------------------------------------------------------------------
# Threshold sampling


def _fit_sigma(lo: float, mean: float, n: int) -> float:
    """Lognormal sigma whose 1/(n+1) quantile sits at min for the target
    mean (quantile-matched; samples are affine-corrected afterwards)."""
    if math.isclose(lo, mean):
        return 0.0
    spread = math.log(mean / lo)
    z = norm.ppf(1.0 / (n + 1))  # negative
    sigma = z + math.sqrt(z * z + 2.0 * spread)
    if not sigma > 0:
        raise CalibrationError(f"cannot fit spread min={lo} mean={mean} n={n}")
    return min(sigma, 3.0)


def _sample_hc(lo: float, mean: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n per-row first-flip hammer counts with sample min == lo and sample
    mean == mean (exact, via affine correction of a lognormal draw)."""
    if n == 1:
        return np.full(1, mean)
    sigma = _fit_sigma(lo, mean, n)
    if sigma == 0.0:
        return np.full(n, mean)
    mu = math.log(mean) - sigma * sigma / 2.0
    raw = rng.lognormal(mu, sigma, size=n)
    raw_min = raw.min()
    raw_mean = raw.mean()
    if math.isclose(raw_mean, raw_min):
        return np.full(n, mean)
    a = (mean - lo) / (raw_mean - raw_min)
    b = lo - a * raw_min
    return a * raw + b


@dataclass
class ThresholdSet:
    """Per-row, per-kind flip thresholds in effective units, plus each
    row's deterministic weakest bit position."""

    theta: dict[str, np.ndarray]
    weak_bit: np.ndarray
    seed: int
    row_bits: int = 64

    def hc(self, kind: str, profile: ChipProfile) -> np.ndarray:
        """Thresholds converted back to calibration hammer counts."""
        return self.theta[kind] / profile.units_per_hammer(kind)


def sample_thresholds(
    profile: ChipProfile,
    layout: SubarrayLayout,
    seed: int,
    row_bits: int = 64,
) -> ThresholdSet:
    rows = layout.rows
    theta: dict[str, np.ndarray] = {}
    for kind in KINDS:
        if kind not in profile.thresholds:
            continue
        lo, mean = profile.thresholds[kind]
        rng = substream(seed, f"theta.{kind}")
        hc = _sample_hc(lo, mean, rows, rng)
        t = hc * profile.units_per_hammer(kind)
        mults = np.fromiter(
            (
                profile.region_mult[classify_region(r, layout.extent(r))]
                for r in range(rows)
            ),
            dtype=np.float64,
            count=rows,
        )
        theta[kind] = np.maximum(t * mults, 1e-9)
    weak = np.fromiter(
        (stable_hash(seed, r) % row_bits for r in range(rows)),
        dtype=np.int64,
        count=rows,
    )
    return ThresholdSet(theta=theta, weak_bit=weak, seed=seed, row_bits=row_bits)


# ---------------------------------------------------------------------------
# Damage accrual


@dataclass(frozen=True)
class Bitflip:
    row: int
    bit: int
    direction: str
    kind: str
    time: float


@dataclass
class DisturbanceState:
    """Mutable per-bank damage state; damage is a fraction of the victim's
    kind-specific threshold, so mixed-kind patterns add up."""

    rows: int
    damage: dict[int, float] = field(default_factory=dict)
    flipped: dict[int, int] = field(default_factory=dict)
    flips: list[Bitflip] = field(default_factory=list)
    skipped_victims: int = 0

    def restore(self, row: int) -> None:
        self.damage.pop(row, None)
        self.flipped.pop(row, None)

    def reset(self) -> None:
        self.damage.clear()
        self.flipped.clear()
        self.flips.clear()
        self.skipped_victims = 0


def _victims_of(aggressor: int, max_d: int, rows: int):
    for d in range(1, max_d + 1):
        for v in (aggressor - d, aggressor + d):
            yield v, d


def accumulate(
    state: DisturbanceState,
    effects: Sequence,
    thresholds: ThresholdSet,
    profile: ChipProfile,
    temp_c: float = T_REF_C,
    dp: Optional[int] = None,
) -> list[Bitflip]:
    """Fold a batch of analog effects into the damage state; returns the
    bitflips they caused (also appended to state.flips)."""
    from .dram import CopyEffect, GroupOverwrite, HammerEffect, RefreshEffect

    out: list[Bitflip] = []
    esc = profile.bit_escalation
    max_d = profile.max_distance
    damage = state.damage
    for eff in effects:
        if isinstance(eff, RefreshEffect):
            for r in eff.rows:
                state.restore(r)
            continue
        if isinstance(eff, CopyEffect):
            state.restore(eff.dst)
            continue
        if isinstance(eff, GroupOverwrite):
            for r in eff.rows:
                state.restore(r)
            continue
        if not isinstance(eff, HammerEffect):
            raise ConfigError(f"unknown effect {type(eff).__name__}")
        kind = EFFECT_KIND[eff.kind]
        theta = thresholds.theta.get(kind)
        for a in eff.aggressors:
            state.restore(a)
        if theta is None:
            continue  # kind not expressible on this module
        agg = set(eff.aggressors)
        hits: dict[int, int] = {}
        if kind == SIMRA:
            # one deposit per op; distance to the nearest group member
            for a in agg:
                for v, d in _victims_of(a, max_d, state.rows):
                    if v in agg:
                        continue
                    if v not in hits or d < hits[v]:
                        hits[v] = d
            pairs = hits.items()
        else:
            pairs = []
            for a in agg:
                for v, d in _victims_of(a, max_d, state.rows):
                    if v not in agg:
                        pairs.append((v, d))
        n_factor = profile.simra_n_factor(len(agg)) if kind == SIMRA else 1.0
        for v, d in pairs:
            if not 0 <= v < state.rows:
                state.skipped_victims += 1
                continue
            c = contribution(kind, dp, temp_c, eff.t_on, d, profile) * n_factor
            f = damage.get(v, 0.0) + c / theta[v]
            damage[v] = f
            nf = state.flipped.get(v, 0)
            # small slack so that exactly reaching the threshold flips
            # despite accumulated floating-point rounding
            while f >= esc**nf * (1.0 - 1e-9):
                flip = Bitflip(
                    row=v,
                    bit=int((thresholds.weak_bit[v] + nf) % thresholds.row_bits),
                    direction=profile.flip_direction.get(kind, "1to0"),
                    kind=kind,
                    time=eff.time,
                )
                out.append(flip)
                nf += 1
            if nf:
                state.flipped[v] = nf
    state.flips.extend(out)
    return out
