"""Fixed-timestep engine advancing MTJs, analog chains, and the coupling network.

Per step and per block: branch current from the present MTJ state, a Markov
step of the junction using the state-dependent barrier, sense voltage, filter
update, threshold from the input (waveform or resistive network), comparator.
Comparator outputs enter the network with a one-step delay, which breaks the
algebraic loop; at nanosecond steps against microsecond dwell times the delay
is far below the physical settling scales.

Randomness: each MTJ owns a counter-based stream keyed by (seed, block
index), so adding observers or re-chunking never changes a trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .analog import PBlockConfig, branch_current, sense_voltage
from .ising import Clamp
from .mtj import MtjParams, MtjState, effective_barrier, mean_dwell
from .synthesis import CouplingNetwork

# Clamp drive levels on the wire: DRIVE0 pins logic '0' (terminal at v_dd,
# the block inverts), DRIVE1 pins logic '1', FLOAT leaves the p-bit free.
DRIVE0 = _kernels.DRIVE0
DRIVE1 = _kernels.DRIVE1
FLOAT = _kernels.FLOAT

_CLAMP_TO_DRIVE = {Clamp.ZERO: DRIVE0, Clamp.ONE: DRIVE1, Clamp.FREE: FLOAT}

# Engine guardrail: dt must resolve dwell times and filter constants.
TIMESTEP_MARGIN = 100.0

_CHUNK_TARGET = 1 << 20


class InvariantViolation(RuntimeError):
    """A run-time invariant of the simulation was violated."""


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for a named stream derived from (seed, key)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, *key))))


@dataclass(frozen=True)
class SimConfig:
    """Timestep, horizon, trace decimation, and the seed of a run."""

    duration: float              # s
    dt: float = 1e-9             # s
    sample_period: float = 5e-6  # s
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.dt <= self.sample_period <= self.duration:
            raise ValueError(
                f"need 0 < dt <= sample_period <= duration, got "
                f"dt={self.dt}, sample_period={self.sample_period}, duration={self.duration}")
        if abs(self.decim * self.dt - self.sample_period) > 1e-9 * self.sample_period:
            raise ValueError("sample_period must be an integer multiple of dt")
        if abs(self.n_samples * self.sample_period - self.duration) > 1e-9 * self.duration:
            raise ValueError("duration must be an integer multiple of sample_period")

    @property
    def decim(self) -> int:
        return max(1, round(self.sample_period / self.dt))

    @property
    def n_samples(self) -> int:
        return max(1, round(self.duration / self.sample_period))

    @property
    def n_steps(self) -> int:
        return self.n_samples * self.decim


@dataclass(frozen=True)
class Waveform:
    """Piecewise input voltage: constant, step, or linear ramp."""

    kind: str                    # 'constant' | 'step' | 'ramp'
    v0: float
    v1: float = 0.0
    t0: float = 0.0
    t1: float = 0.0

    @classmethod
    def constant(cls, v: float) -> "Waveform":
        return cls("constant", v)

    @classmethod
    def step(cls, v0: float, v1: float, t_step: float) -> "Waveform":
        return cls("step", v0, v1, t_step, t_step)

    @classmethod
    def ramp(cls, v0: float, v1: float, t0: float, t1: float) -> "Waveform":
        if t1 <= t0:
            raise ValueError("ramp needs t1 > t0")
        return cls("ramp", v0, v1, t0, t1)

    def at(self, t: float) -> float:
        return float(self.values(np.array([t]))[0])

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.v0)
        if self.kind == "step":
            return np.where(t < self.t0, self.v0, self.v1)
        if self.kind == "ramp":
            frac = np.clip((t - self.t0) / (self.t1 - self.t0), 0.0, 1.0)
            return self.v0 + (self.v1 - self.v0) * frac
        raise ValueError(f"unknown waveform kind {self.kind!r}")


@dataclass(frozen=True)
class ClampSchedule:
    """Timed drive levels for the clamp terminals.

    Events are (time, terminal, level) with non-decreasing times per
    terminal; every terminal needs a level at t = 0.
    """

    n_terminals: int
    events: tuple[tuple[float, int, int], ...]

    @classmethod
    def constant(cls, levels: Sequence[int]) -> "ClampSchedule":
        return cls(len(levels), tuple((0.0, t, lvl) for t, lvl in enumerate(levels)))

    @classmethod
    def from_clamps(cls, clamps: Sequence[Clamp]) -> "ClampSchedule":
        return cls.constant([_CLAMP_TO_DRIVE[c] for c in clamps])

    def __post_init__(self):
        seen_at_zero = set()
        last_time: dict[int, float] = {}
        for tm, term, lvl in self.events:
            if not 0 <= term < self.n_terminals:
                raise InvariantViolation(f"schedule references unknown terminal {term}")
            if lvl not in (DRIVE0, DRIVE1, FLOAT):
                raise ValueError(f"unknown clamp level {lvl}")
            if tm < 0:
                raise ValueError("event times must be non-negative")
            if tm < last_time.get(term, 0.0):
                raise ValueError("event times must be non-decreasing per terminal")
            last_time[term] = tm
            if tm == 0.0:
                seen_at_zero.add(term)
        if seen_at_zero != set(range(self.n_terminals)):
            raise ValueError("every terminal needs an initial level at t=0")

    def levels_for_steps(self, step0: int, n: int, dt: float) -> np.ndarray:
        """Per-terminal drive levels for steps [step0, step0 + n), int8."""
        out = np.empty((self.n_terminals, n), dtype=np.int8)
        t_axis = (np.arange(step0, step0 + n) * dt)
        for term in range(self.n_terminals):
            evs = [(tm, lvl) for tm, tt, lvl in self.events if tt == term]
            lv = np.full(n, evs[0][1], dtype=np.int8)
            for tm, lvl in evs:
                lv[t_axis >= tm - 1e-15] = lvl
            out[term] = lv
        return out


@dataclass
class Trace:
    """Decimated record of a run: per block, state and analog signals.

    ``v_out_min``/``v_out_max`` are the comparator-output extremes inside
    each sample window, so brief excursions are not aliased away.
    """

    times: np.ndarray                  # (n_samples,)
    mtj_state: np.ndarray              # (n_blocks, n_samples) int8, 1 = P
    v_mtj: np.ndarray
    v_filt: np.ndarray
    v_thresh: np.ndarray
    v_out: np.ndarray
    v_out_min: np.ndarray
    v_out_max: np.ndarray
    clamp: np.ndarray                  # (n_terminals, n_samples) int8 drive levels

    @property
    def n_blocks(self) -> int:
        return self.mtj_state.shape[0]

    def logic(self) -> np.ndarray:
        """Logic readout per block and sample: '1' iff v_out > 0."""
        return (self.v_out > 0.0).astype(np.int8)

    def codes(self) -> np.ndarray:
        """Integer state code per sample, block 0 as the most significant bit."""
        logic = self.logic()
        weights = 1 << np.arange(self.n_blocks - 1, -1, -1)
        return (weights[:, None] * logic).sum(axis=0)

    def write_csv(self, path) -> None:
        """One row per block per sample with the fixed public column set."""
        names = {DRIVE0: "0", DRIVE1: "1", FLOAT: "n"}
        with open(path, "w") as f:
            f.write("time_s,blk,mtj_state,v_mtj,v_filt,v_thresh,v_out,clamp_A,clamp_B,clamp_C\n")
            nt = self.clamp.shape[0]
            for k, t in enumerate(self.times):
                cl = [names[int(self.clamp[j, k])] if j < nt else "n" for j in range(3)]
                for b in range(self.n_blocks):
                    f.write(f"{t:.10g},{b},{'P' if self.mtj_state[b, k] else 'AP'},"
                            f"{self.v_mtj[b, k]:.10g},{self.v_filt[b, k]:.10g},"
                            f"{self.v_thresh[b, k]:.10g},{self.v_out[b, k]:.10g},"
                            f"{cl[0]},{cl[1]},{cl[2]}\n")


def operating_point(cfg: PBlockConfig, mtj: MtjParams) -> tuple[float, float, float, float]:
    """Two-level sense voltages and dwell times under the configured drive.

    Returns (level_ap, level_p, tau_ap, tau_p).  The P dwell is set by the
    current the branch draws while in P (the low-resistance state draws
    more, closing the torque feedback); the AP dwell is set by the static
    bias field alone.
    """
    i_p = branch_current(cfg.v_block, cfg.r_sense, mtj.r_p)
    i_ap = branch_current(cfg.v_block, cfg.r_sense, mtj.r_ap)
    level_p = sense_voltage(i_p, cfg.r_sense)
    level_ap = sense_voltage(i_ap, cfg.r_sense)
    tau_p = mean_dwell(effective_barrier(MtjState.P, i_p, mtj.bias_field, mtj), mtj.tau0)
    tau_ap = mean_dwell(effective_barrier(MtjState.AP, i_ap, mtj.bias_field, mtj), mtj.tau0)
    return level_ap, level_p, tau_ap, tau_p


def validate_timestep(sim: SimConfig, blocks: Sequence[tuple[PBlockConfig, MtjParams]]) -> None:
    """Reject runs whose dt cannot resolve the configured time scales."""
    for cfg, mtj in blocks:
        tau_ap, tau_p = operating_point(cfg, mtj)[2:4]
        for name, tau in (("P dwell", tau_p), ("AP dwell", tau_ap)):
            if tau < TIMESTEP_MARGIN * sim.dt:
                raise InvariantViolation(
                    f"dt={sim.dt} too coarse: {name} {tau:.3g}s is below {TIMESTEP_MARGIN}x dt")
        if cfg.t_c > 0 and cfg.t_c < TIMESTEP_MARGIN * sim.dt:
            raise InvariantViolation(
                f"dt={sim.dt} too coarse: filter constant {cfg.t_c:.3g}s is below "
                f"{TIMESTEP_MARGIN}x dt")


def _block_constants(cfg: PBlockConfig, mtj: MtjParams, dt: float):
    """Precompute per-state flip probabilities, levels, and filter coefficient."""
    lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
    p_flip = np.array([-math.expm1(-dt / tau_ap), -math.expm1(-dt / tau_p)])
    levels = np.array([lo, hi])
    alpha = 1.0 if cfg.t_c == 0.0 else -math.expm1(-dt / cfg.t_c)
    return p_flip, levels, alpha


def _initial_state(levels, tau_ap, tau_p, rng) -> tuple[int, float]:
    """Stationary-occupancy initial state; one uniform draw."""
    p_occ = tau_p / (tau_p + tau_ap)
    s = 1 if rng.random() < p_occ else 0
    return s, float(levels[s])


def run_pblock(cfg: PBlockConfig, mtj: MtjParams, input_wave: Waveform,
               sim: SimConfig) -> Trace:
    """Simulate one p-block driven by a voltage waveform at its input."""
    validate_timestep(sim, [(cfg, mtj)])
    lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
    p_flip, levels, alpha = _block_constants(cfg, mtj, sim.dt)
    rng = substream(sim.seed, 0)
    s0, v0 = _initial_state(levels, tau_ap, tau_p, rng)

    n_samples, decim = sim.n_samples, sim.decim
    o_state = np.empty((1, n_samples), dtype=np.int8)
    o_vmtj = np.empty((1, n_samples))
    o_vfilt = np.empty((1, n_samples))
    o_vthr = np.empty((1, n_samples))
    o_vout = np.empty((1, n_samples))
    o_vmin = np.empty((1, n_samples))
    o_vmax = np.empty((1, n_samples))

    st = np.array([s0], dtype=np.int64)
    vf = np.array([v0])
    po = np.array([cfg.v_ss])
    a, b = cfg.divider_slope, cfg.divider_offset

    chunk = decim * max(1, _CHUNK_TARGET // decim)
    done = 0
    row = 0
    while done < sim.n_steps:
        n = min(chunk, sim.n_steps - done)
        t_axis = (np.arange(done, done + n) + 1) * sim.dt
        vthresh = a * input_wave.values(t_axis) + b
        u = rng.random(n)
        rows = n // decim
        _kernels.pblock_trace_kernel(
            u, vthresh, p_flip, levels, alpha, cfg.v_dd, cfg.v_ss, cfg.hysteresis,
            decim, st, vf, po,
            o_state[0, row:row + rows], o_vmtj[0, row:row + rows],
            o_vfilt[0, row:row + rows], o_vthr[0, row:row + rows],
            o_vout[0, row:row + rows], o_vmin[0, row:row + rows],
            o_vmax[0, row:row + rows])
        done += n
        row += rows

    times = (np.arange(1, n_samples + 1) * sim.sample_period)
    clamp = np.full((0, n_samples), FLOAT, dtype=np.int8)
    return Trace(times, o_state, o_vmtj, o_vfilt, o_vthr, o_vout, o_vmin, o_vmax, clamp)


def run_pblock_histogram(cfg: PBlockConfig, mtj: MtjParams, sim: SimConfig,
                         n_bins: int = 4096, burn_in: float | None = None,
                         stream_key: int = 0) -> tuple[np.ndarray, np.ndarray, float]:
    """Stationary statistics of one free-running block (input decoupled).

    Returns (bin_edges, counts, p_occupancy) where the histogram covers the
    filtered sense signal over the exact two-level range and occupancy is the
    fraction of accumulated steps spent in the P state.  ``burn_in`` seconds
    (default: ten filter constants) are excluded.
    """
    validate_timestep(sim, [(cfg, mtj)])
    lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
    p_flip, levels, alpha = _block_constants(cfg, mtj, sim.dt)
    rng = substream(sim.seed, stream_key)
    s0, v0 = _initial_state(levels, tau_ap, tau_p, rng)

    if burn_in is None:
        burn_in = 10.0 * cfg.t_c
    skip = min(int(round(burn_in / sim.dt)), sim.n_steps - 1)

    width = (hi - lo) / n_bins
    counts = np.zeros(n_bins, dtype=np.int64)
    occ = np.zeros(1, dtype=np.int64)
    st = np.array([s0], dtype=np.int64)
    vf = np.array([v0])

    chunk = _CHUNK_TARGET * 4
    done = 0
    while done < sim.n_steps:
        n = min(chunk, sim.n_steps - done)
        u = rng.random(n)
        acc_from = max(0, skip - done)
        _kernels.pblock_hist_kernel(u, p_flip, levels, alpha, lo, width, n_bins,
                                    acc_from, st, vf, counts, occ)
        done += n

    accumulated = sim.n_steps - skip
    edges = lo + width * np.arange(n_bins + 1)
    return edges, counts, float(occ[0]) / accumulated


def run_pcircuit(blocks: Sequence[tuple[PBlockConfig, MtjParams]],
                 net: CouplingNetwork, clamps: ClampSchedule,
                 sim: SimConfig) -> Trace:
    """Simulate coupled p-blocks under a resistive network and clamp schedule."""
    nb = len(blocks)
    if net.n != nb:
        raise InvariantViolation(f"network is for {net.n} blocks, got {nb}")
    if clamps.n_terminals != nb:
        raise InvariantViolation("clamp schedule terminal count must match block count")
    for t in net.taps:
        if t.kind in (_kernels.TAP_Q, _kernels.TAP_QBAR) and not 0 <= t.ref < nb:
            raise InvariantViolation(f"network references unknown block {t.ref}")
        if t.kind == _kernels.TAP_CLAMP and not 0 <= t.ref < nb:
            raise InvariantViolation(f"network references unknown clamp terminal {t.ref}")
    validate_timestep(sim, blocks)

    p_flip = np.empty((nb, 2))
    levels = np.empty((nb, 2))
    alpha = np.empty(nb)
    div_a = np.empty(nb)
    div_b = np.empty(nb)
    vdd = np.empty(nb)
    vss = np.empty(nb)
    hyst = np.empty(nb)
    taus = []
    for i, (cfg, mtj) in enumerate(blocks):
        lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
        taus.append((tau_ap, tau_p))
        p_flip[i], levels[i], alpha[i] = _block_constants(cfg, mtj, sim.dt)
        div_a[i], div_b[i] = cfg.divider_slope, cfg.divider_offset
        vdd[i], vss[i], hyst[i] = cfg.v_dd, cfg.v_ss, cfg.hysteresis

    # Sorted flat tap arrays for the kernel, grouped by input node.
    order = sorted(range(len(net.taps)), key=lambda k: net.taps[k].node)
    tap_kind = np.array([net.taps[k].kind for k in order], dtype=np.int8)
    tap_ref = np.array([max(net.taps[k].ref, 0) for k in order], dtype=np.int64)
    tap_g = np.array([net.taps[k].conductance for k in order])
    tap_start = np.zeros(nb + 1, dtype=np.int64)
    for k in order:
        tap_start[net.taps[k].node + 1] += 1
    tap_start = np.cumsum(tap_start)

    streams = [substream(sim.seed, i) for i in range(nb)]
    mtj_state = np.empty(nb, dtype=np.int8)
    v_filt = np.empty(nb)
    for i in range(nb):
        s0, v0 = _initial_state(levels[i], taus[i][0], taus[i][1], streams[i])
        mtj_state[i] = s0
        v_filt[i] = v0
    out = vss.copy()
    thresh = np.zeros(nb)

    n_samples, decim = sim.n_samples, sim.decim
    o_state = np.empty((nb, n_samples), dtype=np.int8)
    o_vmtj = np.empty((nb, n_samples))
    o_vfilt = np.empty((nb, n_samples))
    o_vthr = np.empty((nb, n_samples))
    o_vout = np.empty((nb, n_samples))
    o_vmin = np.empty((nb, n_samples))
    o_vmax = np.empty((nb, n_samples))
    o_clamp = np.empty((nb, n_samples), dtype=np.int8)

    chunk = decim * max(1, _CHUNK_TARGET // decim)
    done = 0
    row = 0
    while done < sim.n_steps:
        n = min(chunk, sim.n_steps - done)
        u = np.empty((nb, n))
        for i in range(nb):
            u[i] = streams[i].random(n)
        clamp_levels = clamps.levels_for_steps(done, n, sim.dt)
        rows = n // decim
        _kernels.pcircuit_kernel(
            u, clamp_levels, tap_start, tap_kind, tap_ref, tap_g,
            net.v_dd, net.v_ss, p_flip, levels, alpha, div_a, div_b,
            vdd, vss, hyst, decim, mtj_state, v_filt, out, thresh,
            o_state[:, row:row + rows], o_vmtj[:, row:row + rows],
            o_vfilt[:, row:row + rows], o_vthr[:, row:row + rows],
            o_vout[:, row:row + rows], o_vmin[:, row:row + rows],
            o_vmax[:, row:row + rows], o_clamp[:, row:row + rows])
        done += n
        row += rows

    times = (np.arange(1, n_samples + 1) * sim.sample_period)
    return Trace(times, o_state, o_vmtj, o_vfilt, o_vthr, o_vout, o_vmin, o_vmax, o_clamp)
