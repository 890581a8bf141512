"""Chip vulnerability profiles: shipped module library plus user overrides.

Profiles live in flat key/value `.profile` files.  The search order is
any directory named by the PUDSIM_PROFILE_DIR environment variable, then
the library shipped with the package.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from . import keyval
from .disturbance import KINDS, REGIONS, ChipProfile
from .errors import ConfigError

PROFILE_DIR_ENV = "PUDSIM_PROFILE_DIR"
DEFAULT_PROFILE = "skhynix_a_8gb"

_SHIPPED = Path(__file__).parent / "profiles"


def _parse_pair(text: str, key: str) -> tuple[float, float]:
    parts = text.split()
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'min mean', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as e:
        raise ConfigError(f"{key}: not numbers: {text!r}") from e


def _parse_anchor_list(text: str, key: str) -> tuple[tuple[float, float], ...]:
    anchors = []
    for token in text.split():
        t, _, m = token.partition(":")
        try:
            anchors.append((float(t), float(m)))
        except ValueError as e:
            raise ConfigError(f"{key}: bad anchor {token!r}") from e
    if not anchors:
        raise ConfigError(f"{key}: empty anchor list")
    return tuple(anchors)


def _parse_dp_table(text: str, key: str) -> dict[int, float]:
    table = {}
    for token in text.split():
        b, _, m = token.partition(":")
        try:
            table[int(b, 0) & 0xFF] = float(m)
        except ValueError as e:
            raise ConfigError(f"{key}: bad entry {token!r}") from e
    return table


def profile_from_values(values: dict[str, str]) -> ChipProfile:
    known_prefixes = (
        "threshold.", "base.", "temp_step.", "t_on.", "dp_mult.",
        "region_mult.", "flip_direction.",
    )
    known_keys = {"name", "vendor", "blast_decay", "max_distance", "bit_escalation"}
    for k in values:
        if k not in known_keys and not k.startswith(known_prefixes):
            raise ConfigError(f"unknown profile key {k!r}")
    if "name" not in values:
        raise ConfigError("profile needs a name")
    defaults = ChipProfile(name="_defaults")
    thresholds = {}
    base = dict(defaults.base)
    temp_step = dict(defaults.temp_step)
    t_on_anchors = dict(defaults.t_on_anchors)
    dp_mult = {k: dict(v) for k, v in defaults.dp_mult.items()}
    flip_direction = dict(defaults.flip_direction)
    for kind in KINDS:
        if f"threshold.{kind}" in values:
            thresholds[kind] = _parse_pair(values[f"threshold.{kind}"], f"threshold.{kind}")
        if f"base.{kind}" in values:
            base[kind] = keyval.parse_float(values, f"base.{kind}", base[kind])
        if f"temp_step.{kind}" in values:
            temp_step[kind] = keyval.parse_float(values, f"temp_step.{kind}", 1.0)
        if f"t_on.{kind}" in values:
            t_on_anchors[kind] = _parse_anchor_list(values[f"t_on.{kind}"], f"t_on.{kind}")
        if f"dp_mult.{kind}" in values:
            dp_mult[kind] = _parse_dp_table(values[f"dp_mult.{kind}"], f"dp_mult.{kind}")
        if f"flip_direction.{kind}" in values:
            d = values[f"flip_direction.{kind}"]
            flip_direction[kind] = d
    region_mult = {r: keyval.parse_float(values, f"region_mult.{r}", 1.0) for r in REGIONS}
    return ChipProfile(
        name=values["name"],
        vendor=values.get("vendor", ""),
        thresholds=thresholds,
        base=base,
        temp_step=temp_step,
        t_on_anchors=t_on_anchors,
        dp_mult=dp_mult,
        blast_decay=keyval.parse_float(values, "blast_decay", defaults.blast_decay),
        max_distance=keyval.parse_int(values, "max_distance", defaults.max_distance),
        region_mult=region_mult,
        flip_direction=flip_direction,
        bit_escalation=keyval.parse_float(values, "bit_escalation", defaults.bit_escalation),
    )


def _search_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get(PROFILE_DIR_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(_SHIPPED)
    return dirs


def available_profiles() -> list[str]:
    names = set()
    for d in _search_dirs():
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.profile"))
    return sorted(names)


def load_profile(name: str) -> ChipProfile:
    """Load by library name or by explicit path to a .profile file."""
    p = Path(name)
    if p.suffix == ".profile" and p.exists():
        return profile_from_values(keyval.load(p))
    for d in _search_dirs():
        candidate = d / f"{name}.profile"
        if candidate.exists():
            return profile_from_values(keyval.load(candidate))
    raise ConfigError(f"no profile named {name!r} (known: {', '.join(available_profiles())})")


def load_default_profile() -> ChipProfile:
    return load_profile(DEFAULT_PROFILE)
