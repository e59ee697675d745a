"""Named experiments over the engine: transfer curves, signal histograms,
step response, ramp checks, clamped-gate statistics, stabilization after a
clamp flip, and exact-distribution reports.

Every experiment is deterministic given its seed; scenario streams are keyed
so reruns and parallel fan-out cannot collide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .analog import PBlockConfig
from .engine import (ClampSchedule, SimConfig, Trace, Waveform, operating_point,
                     run_pblock, run_pblock_histogram, run_pcircuit, substream,
                     DRIVE0, DRIVE1, FLOAT)
from .histogram import StateHistogram, code_str, tv_distance
from .ising import Clamp, IsingSpec, boltzmann_oracle
from .mtj import MtjParams
from .synthesis import CouplingNetwork, AND_LEGAL_SET


def _replace_tc(cfg: PBlockConfig, t_c: float) -> PBlockConfig:
    from dataclasses import replace
    return replace(cfg, t_c=t_c)


# ---------------------------------------------------------------------------
# p-block experiments


@dataclass
class TransferCurve:
    """Mean logic output versus input voltage, one curve per filter constant."""

    t_c_list: list[float]
    v_in: np.ndarray
    mean_out: np.ndarray            # (len(t_c_list), len(v_in))

    def rows(self):
        for i, tc in enumerate(self.t_c_list):
            for j, v in enumerate(self.v_in):
                yield tc, float(v), float(self.mean_out[i, j])


def transfer_curve(cfg: PBlockConfig, mtj: MtjParams, t_c_list: Sequence[float],
                   input_grid: Sequence[float], sim: SimConfig,
                   shared_noise: bool = True) -> TransferCurve:
    """Time-averaged logic output against a grid of constant inputs.

    With ``shared_noise`` (default) each filter constant is simulated once
    and every grid threshold is applied to the same stationary signal
    histogram; curves are then exactly monotone in the input because a higher
    threshold can only exclude samples.  With ``shared_noise=False`` every
    (t_c, v_in) cell runs independently with its own derived seed.
    """
    grid = np.asarray(list(input_grid), dtype=float)
    means = np.empty((len(t_c_list), len(grid)))
    for i, tc in enumerate(t_c_list):
        cfg_tc = _replace_tc(cfg, tc)
        a, b = cfg_tc.divider_slope, cfg_tc.divider_offset
        if shared_noise:
            edges, counts, _occ = run_pblock_histogram(
                cfg_tc, mtj, sim, n_bins=4096, stream_key=i)
            # P(v_filt > threshold) from the complementary CDF of the bins;
            # mass in the bin containing the threshold is excluded, bounding
            # the quantization error by one bin's occupancy.
            tail = np.concatenate([np.cumsum(counts[::-1])[::-1], [0]]) / counts.sum()
            thresholds = a * grid + b
            idx = np.searchsorted(edges, thresholds, side="right") - 1
            idx = np.clip(idx + 1, 0, len(counts))
            means[i] = tail[idx]
        else:
            for j, v in enumerate(grid):
                cell = SimConfig(duration=sim.duration, dt=sim.dt,
                                 sample_period=sim.sample_period,
                                 seed=int(substream(sim.seed, i, j).integers(2 ** 62)))
                tr = run_pblock(cfg_tc, mtj, Waveform.constant(float(v)), cell)
                means[i, j] = tr.logic().mean()
    return TransferCurve(list(t_c_list), grid, means)


@dataclass
class VmtjHistograms:
    """Binned distribution of the filtered sense signal per filter constant."""

    t_c_list: list[float]
    edges: np.ndarray                 # shared bin edges over the two-level range
    counts: np.ndarray                # (len(t_c_list), n_bins)

    def frequencies(self) -> np.ndarray:
        tot = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.maximum(tot, 1)


def vmtj_histogram(cfg: PBlockConfig, mtj: MtjParams, t_c_list: Sequence[float],
                   sim: SimConfig, n_bins: int = 64) -> VmtjHistograms:
    """Distribution of the filtered sense voltage for each filter constant.

    Bins span the exact two-level range, so the outermost bins hold the
    telegraph levels themselves.
    """
    lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
    min_dwells = sim.duration / max(tau_ap, tau_p)
    if min_dwells < 1e3:
        raise ValueError(f"duration covers only {min_dwells:.0f} dwells, need >= 1000")
    all_counts = np.empty((len(t_c_list), n_bins), dtype=np.int64)
    edges = None
    for i, tc in enumerate(t_c_list):
        e, counts, _ = run_pblock_histogram(_replace_tc(cfg, tc), mtj, sim,
                                            n_bins=n_bins, stream_key=i)
        all_counts[i] = counts
        edges = e
    return VmtjHistograms(list(t_c_list), edges, all_counts)


@dataclass
class StepResponse:
    """First-response latency per capture, plus overlayable output segments."""

    latencies: np.ndarray             # seconds, NaN where censored
    censored: np.ndarray              # bool per capture
    overlay_times: np.ndarray         # relative to the step instant
    overlay_vout: np.ndarray          # (n_captures, len(overlay_times))

    def quantile(self, q: float) -> float:
        good = self.latencies[~self.censored]
        if len(good) == 0:
            return math.nan
        return float(np.quantile(good, q))

    @property
    def n_responding(self) -> int:
        return int((~self.censored).sum())


def step_response(cfg: PBlockConfig, mtj: MtjParams, sim: SimConfig,
                  v_before: float, v_after: float, t_step: float,
                  n_captures: int = 100) -> StepResponse:
    """Latency from an input step to the first output transition it explains.

    Each capture runs with a fresh derived seed and full-rate sampling.  The
    step raises the threshold (for ``v_after > v_before``), so the response
    looked for is the first output move toward the side the new threshold
    selects; captures already on the new side that never move are censored.
    """
    wave = Waveform.step(v_before, v_after, t_step)
    # Sample k of a full-rate trace is at time (k+1)*dt; the sample at
    # exactly t_step already sees the new threshold, so the pre-step output
    # is two samples back and latencies count from strictly after the step.
    step_idx = int(round(t_step / sim.dt))
    if step_idx < 2 or step_idx >= sim.n_steps:
        raise ValueError("step instant must fall inside the run")
    lat = np.full(n_captures, np.nan)
    cens = np.zeros(n_captures, dtype=bool)
    overlay = None
    rel_times = None
    going_down = v_after > v_before    # higher threshold pushes the output low
    for c in range(n_captures):
        cap = SimConfig(duration=sim.duration, dt=sim.dt, sample_period=sim.dt,
                        seed=int(substream(sim.seed, c).integers(2 ** 62)))
        tr = run_pblock(cfg, mtj, wave, cap)
        vout = tr.v_out[0]
        target = cfg.v_ss if going_down else cfg.v_dd
        if vout[step_idx - 2] == target:
            cens[c] = True           # already on the new side; nothing to flip
        else:
            hits = np.flatnonzero(vout[step_idx:] == target)
            if len(hits) == 0:
                cens[c] = True       # no response inside the capture window
            else:
                lat[c] = (hits[0] + 1) * sim.dt
        if overlay is None:
            span = min(len(vout) - step_idx, step_idx)
            rel_times = (np.arange(-span, span) * sim.dt)
            overlay = np.empty((n_captures, 2 * span))
        span = len(rel_times) // 2
        overlay[c] = vout[step_idx - span: step_idx + span]
    return StepResponse(lat, cens, rel_times, overlay)


@dataclass
class RampResult:
    """Per-block sliding-window logic means along a shared ramp input."""

    trace_times: np.ndarray
    v_in: np.ndarray
    window_centers: np.ndarray
    window_means: np.ndarray          # (n_blocks, n_windows)
    v_out_values: np.ndarray          # distinct comparator output values seen


def ramp_test(blocks: Sequence[tuple[PBlockConfig, MtjParams]], sim: SimConfig,
              v0: float, v1: float, window: float) -> RampResult:
    """Drive every block's input (network disconnected) with one shared ramp."""
    wave = Waveform.ramp(v0, v1, 0.0, sim.duration)
    traces = []
    for b, (cfg, mtj) in enumerate(blocks):
        blk_sim = SimConfig(duration=sim.duration, dt=sim.dt,
                            sample_period=sim.sample_period,
                            seed=int(substream(sim.seed, b).integers(2 ** 62)))
        traces.append(run_pblock(cfg, mtj, wave, blk_sim))
    times = traces[0].times
    logic = np.vstack([tr.logic()[0] for tr in traces])
    win = max(1, int(round(window / sim.sample_period)))
    n_win = logic.shape[1] // win
    centers = np.array([times[i * win: (i + 1) * win].mean() for i in range(n_win)])
    means = np.empty((len(blocks), n_win))
    for b in range(len(blocks)):
        means[b] = [logic[b, i * win: (i + 1) * win].mean() for i in range(n_win)]
    vouts = np.unique(np.vstack([tr.v_out[0] for tr in traces]))
    return RampResult(times, wave.values(times), centers, means, vouts)


# ---------------------------------------------------------------------------
# p-circuit experiments


def histogram_from_trace(trace: Trace, legal_set=AND_LEGAL_SET,
                         from_sample: int = 0) -> StateHistogram:
    codes = trace.codes()[from_sample:]
    counts = np.bincount(codes, minlength=2 ** trace.n_blocks)
    return StateHistogram.from_counts(counts, legal_set)


def clamp_experiment(blocks: Sequence[tuple[PBlockConfig, MtjParams]],
                     net: CouplingNetwork, clamps: Sequence[Clamp],
                     sim: SimConfig, legal_set=AND_LEGAL_SET,
                     settle: float = 0.0) -> tuple[StateHistogram, Trace]:
    """Histogram of logic codes under a fixed clamp assignment."""
    sched = ClampSchedule.from_clamps(list(clamps))
    trace = run_pcircuit(blocks, net, sched, sim)
    skip = int(round(settle / sim.sample_period))
    return histogram_from_trace(trace, legal_set, from_sample=skip), trace


@dataclass
class StabilizationResult:
    """Relaxation of the code statistics after the output clamp releases."""

    window_seconds: np.ndarray
    window_hists: list[StateHistogram]
    tv_to_stationary: np.ndarray
    stationary: StateHistogram
    suppression_onset: float          # s after the flip; NaN if never
    n_trials: int


def stabilization(blocks, net, sim: SimConfig, t_flip: float,
                  window_list: Sequence[float], n_trials: int = 64,
                  suppression_threshold: float = 0.2,
                  suppression_window: float = 10e-6,
                  legal_set=AND_LEGAL_SET) -> StabilizationResult:
    """Flip terminal C from driving logic '1' to '0' and watch the histogram form.

    Statistics accumulate across ``n_trials`` independent flips (each trial a
    fresh seeded run).  For each requested window the histogram over samples
    in [t_flip, t_flip + w] is compared against the post-flip stationary
    histogram (the tail past the largest window).  Also reported: the first
    time after the flip at which the frequency of '11' on the first two
    terminals inside a forward-looking window drops below the threshold.
    """
    from .stats import sliding_window_freq

    windows = np.asarray(sorted(window_list), dtype=float)
    # stationary statistics come from the tail past the largest window
    horizon = t_flip + float(windows.max()) + sim.sample_period
    if horizon > sim.duration:
        raise ValueError("duration too short for the requested windows")
    flip_sample = int(round(t_flip / sim.sample_period))
    n_codes = 2 ** len(blocks)

    window_counts = np.zeros((len(windows), n_codes), dtype=np.int64)
    stat_counts = np.zeros(n_codes, dtype=np.int64)
    ab11 = None
    for trial in range(n_trials):
        sched = ClampSchedule(len(blocks), tuple(
            [(0.0, t, FLOAT) for t in range(len(blocks) - 1)]
            + [(0.0, len(blocks) - 1, DRIVE1), (t_flip, len(blocks) - 1, DRIVE0)]))
        trial_sim = SimConfig(duration=sim.duration, dt=sim.dt,
                              sample_period=sim.sample_period,
                              seed=int(substream(sim.seed, trial).integers(2 ** 62)))
        trace = run_pcircuit(blocks, net, sched, trial_sim)
        codes = trace.codes()
        post = codes[flip_sample:]
        for i, w in enumerate(windows):
            n = int(round(w / sim.sample_period))
            window_counts[i] += np.bincount(post[:n], minlength=n_codes)
        tail_from = int(round((t_flip + windows.max()) / sim.sample_period))
        stat_counts += np.bincount(codes[tail_from:], minlength=n_codes)
        logic = trace.logic()
        is11 = ((logic[0] == 1) & (logic[1] == 1)).astype(float)[flip_sample:]
        ab11 = is11 if ab11 is None else ab11 + is11
    ab11 /= n_trials

    stationary = StateHistogram.from_counts(stat_counts, legal_set)
    hists = [StateHistogram.from_counts(window_counts[i], legal_set) for i in range(len(windows))]
    tvs = np.array([h.tv_to(stationary) for h in hists])

    win_samples = max(1, int(round(suppression_window / sim.sample_period)))
    moving = sliding_window_freq(ab11, win_samples)
    below = np.flatnonzero(moving < suppression_threshold)
    onset = float(below[0] * sim.sample_period) if len(below) else math.nan
    return StabilizationResult(windows, hists, tvs, stationary, onset, n_trials)


# ---------------------------------------------------------------------------
# oracle bridge


@dataclass
class OracleReport:
    """Exact distribution for a clamp assignment, with optional comparison."""

    spec: IsingSpec
    clamps: tuple[Clamp, ...]
    probs: np.ndarray
    legal: np.ndarray
    tv: float | None = None
    per_code_delta: np.ndarray | None = None

    def codes(self):
        return [code_str(i, self.spec.n) for i in range(2 ** self.spec.n)]

    def modal_codes(self, rtol: float = 1e-9) -> set[str]:
        top = self.probs.max()
        return {code_str(i, self.spec.n)
                for i in np.flatnonzero(self.probs >= top * (1.0 - rtol))}


def oracle_report(spec: IsingSpec, clamps: Sequence[Clamp] | None = None,
                  histogram: StateHistogram | None = None,
                  legal_set=AND_LEGAL_SET) -> OracleReport:
    """Exact conditional distribution; TV and per-code deltas if a histogram is given."""
    cl = tuple(clamps) if clamps is not None else tuple(Clamp.FREE for _ in range(spec.n))
    probs = boltzmann_oracle(spec, cl)
    legal = np.array([code_str(i, spec.n) in legal_set for i in range(2 ** spec.n)])
    tv = None
    delta = None
    if histogram is not None:
        tv = tv_distance(histogram.freqs, probs)
        delta = histogram.freqs - probs
    return OracleReport(spec, cl, probs, legal, tv, delta)


def calibrate_beta(device_hist: StateHistogram, spec: IsingSpec,
                   clamps: Sequence[Clamp] | None = None,
                   bounds: tuple[float, float] = (0.25, 4.0)) -> tuple[float, float]:
    """Effective inverse temperature matching the oracle to a device histogram.

    One-dimensional bounded search minimizing total variation.  The TV curve
    flattens once the oracle's constraint-violating mass falls below the
    device's, so the reported optimum can sit anywhere on that plateau; the
    comparisons that use it are insensitive across the plateau.
    """
    cl = tuple(clamps) if clamps is not None else tuple(Clamp.FREE for _ in range(spec.n))

    def tv_at(beta: float) -> float:
        return device_hist.tv_to(boltzmann_oracle(spec.with_gain(beta=float(beta)), cl))

    res = minimize_scalar(tv_at, bounds=bounds, method="bounded",
                          options={"xatol": 1e-3})
    return float(res.x), float(res.fun)
