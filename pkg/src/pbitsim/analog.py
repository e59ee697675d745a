"""Analog primitives of the p-block signal chain.

Everything here is a pure function: the bias branch that turns the MTJ's
resistance oscillation into a two-level sense voltage, the one-pole low-pass
filter that reshapes it, the input divider that attenuates and shifts the
input into the sense-voltage band, the output comparator, and the resistive
node solve used by coupling networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class PBlockConfig:
    """Circuit constants of one p-block.

    The divider r1/r2/r3 maps the input node onto the comparator threshold:
    r1 from the input, r2 to v_ss, r3 to v_dd.  ``t_c`` is the filter time
    constant R_filt * C_filt; zero means the unfiltered path.
    """

    v_block: float               # V, D.C. source driving the MTJ branch
    r_sense: float               # ohm
    t_c: float                   # s
    r1: float                    # ohm, input -> threshold node
    r2: float                    # ohm, threshold node -> v_ss
    r3: float                    # ohm, threshold node -> v_dd
    v_dd: float = 1.65           # V
    v_ss: float = -1.65          # V
    hysteresis: float = 0.0      # V, full band width

    def __post_init__(self):
        if self.r_sense <= 0:
            raise ValueError("r_sense must be positive")
        if self.t_c < 0:
            raise ValueError("t_c must be non-negative")
        if not (self.v_dd > 0 > self.v_ss):
            raise ValueError(f"rails must straddle 0, got v_dd={self.v_dd}, v_ss={self.v_ss}")
        if min(self.r1, self.r2, self.r3) <= 0:
            raise ValueError("divider resistors must be positive")
        if self.hysteresis < 0:
            raise ValueError("hysteresis must be non-negative")

    @property
    def divider_slope(self) -> float:
        """d(threshold)/d(v_in) = g1 / (g1 + g2 + g3), in (0, 1)."""
        g1, g2, g3 = 1.0 / self.r1, 1.0 / self.r2, 1.0 / self.r3
        return g1 / (g1 + g2 + g3)

    @property
    def divider_offset(self) -> float:
        """Threshold at v_in = 0: (g2 v_ss + g3 v_dd) / (g1 + g2 + g3)."""
        g1, g2, g3 = 1.0 / self.r1, 1.0 / self.r2, 1.0 / self.r3
        return (g2 * self.v_ss + g3 * self.v_dd) / (g1 + g2 + g3)


@dataclass(frozen=True)
class SourceTap:
    """One resistive path into a node: a source voltage seen through a conductance."""

    voltage: float       # V
    conductance: float   # S

    def __post_init__(self):
        if self.conductance <= 0:
            raise ValueError("conductance must be positive")


def branch_current(v_block: float, r_sense: float, r_mtj: float) -> float:
    """Series branch current v_block / (r_sense + r_mtj)."""
    total = r_sense + r_mtj
    if total <= 0:
        raise ValueError(f"non-positive branch resistance {total}")
    return v_block / total


def sense_voltage(current: float, r_sense: float) -> float:
    """Voltage across the sense resistor; the observable telegraph signal."""
    return current * r_sense


def rc_filter_step(v_in: float, v_prev: float, dt: float, t_c: float) -> float:
    """Exact one-pole update over dt; unconditionally stable for any dt.

    t_c = 0 reproduces the unfiltered path (returns v_in).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_c < 0:
        raise ValueError("t_c must be non-negative")
    if t_c == 0.0:
        return v_in
    return v_prev + (v_in - v_prev) * -math.expm1(-dt / t_c)


def threshold_from_input(v_in: float, cfg: PBlockConfig) -> float:
    """Divider output: conductance-weighted mean of v_in and the two rails.

    Affine in v_in with slope cfg.divider_slope and offset cfg.divider_offset.
    """
    g1, g2, g3 = 1.0 / cfg.r1, 1.0 / cfg.r2, 1.0 / cfg.r3
    return (g1 * v_in + g2 * cfg.v_ss + g3 * cfg.v_dd) / (g1 + g2 + g3)


def comparator(v_filt: float, v_thresh: float, prev_out: float, cfg: PBlockConfig) -> float:
    """Rail-valued comparison of the filtered sense signal against the threshold.

    Zero hysteresis: strict > selects v_dd, ties fall to v_ss (a measure-zero
    event, pinned for determinism).  With hysteresis the previous output is
    held inside the +-hysteresis/2 band.
    """
    if cfg.hysteresis == 0.0:
        return cfg.v_dd if v_filt > v_thresh else cfg.v_ss
    margin = cfg.hysteresis / 2.0
    if v_filt > v_thresh + margin:
        return cfg.v_dd
    if v_filt < v_thresh - margin:
        return cfg.v_ss
    return prev_out


def millman_node(taps: Sequence[SourceTap]) -> float:
    """Node voltage of resistively mixed sources: sum(g v) / sum(g)."""
    if not taps:
        raise ValueError("millman_node needs at least one tap")
    num = sum(t.conductance * t.voltage for t in taps)
    den = sum(t.conductance for t in taps)
    return num / den


def design_input_divider(slope: float, offset: float, r1: float,
                         v_dd: float = 1.65, v_ss: float = -1.65) -> tuple[float, float, float]:
    """Solve (r1, r2, r3) realizing a target threshold map a*v_in + b.

    Given r1 and the rails, returns the unique rail resistors that put the
    divider slope at ``slope`` and the zero-input threshold at ``offset``.
    """
    if not 0 < slope < 1:
        raise ValueError("slope must be in (0, 1)")
    g1 = 1.0 / r1
    g_total = g1 / slope
    g_rails = g_total - g1
    # offset = (g2 v_ss + g3 v_dd)/g_total with g2 + g3 = g_rails
    g3 = (offset * g_total - g_rails * v_ss) / (v_dd - v_ss)
    g2 = g_rails - g3
    if g2 <= 0 or g3 <= 0:
        raise ValueError(f"offset {offset} not reachable at slope {slope} with rails ({v_ss}, {v_dd})")
    return r1, 1.0 / g2, 1.0 / g3


def telegraph_levels(cfg: PBlockConfig, r_p: float, r_ap: float) -> tuple[float, float]:
    """Sense-voltage levels (AP, P) of the two-state branch; P is the higher one."""
    lo = sense_voltage(branch_current(cfg.v_block, cfg.r_sense, r_ap), cfg.r_sense)
    hi = sense_voltage(branch_current(cfg.v_block, cfg.r_sense, r_p), cfg.r_sense)
    return lo, hi
