import math

import numpy as np
import pytest

from pbitsim.analog import PBlockConfig, SourceTap, comparator, millman_node, rc_filter_step, threshold_from_input
from pbitsim.engine import (DRIVE0, DRIVE1, FLOAT, ClampSchedule, InvariantViolation,
                            SimConfig, Trace, Waveform, operating_point, run_pblock,
                            run_pblock_histogram, run_pcircuit, substream)
from pbitsim.histogram import StateHistogram, tv_distance
from pbitsim.ising import Clamp
from pbitsim.mtj import MtjParams
from pbitsim.synthesis import TAP_CLAMP, TAP_Q, TAP_QBAR, TAP_VDD, TAP_VSS, ising_to_network


class TestSimConfig:
    def test_valid(self):
        sim = SimConfig(duration=1e-3, dt=1e-9, sample_period=1e-6, seed=1)
        assert sim.decim == 1000
        assert sim.n_samples == 1000
        assert sim.n_steps == 1_000_000

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            SimConfig(duration=1e-6, dt=1e-9, sample_period=1e-5)

    def test_alignment_enforced(self):
        with pytest.raises(ValueError):
            SimConfig(duration=1e-3, dt=3e-9, sample_period=1e-6)


class TestWaveform:
    def test_constant(self):
        assert Waveform.constant(0.0).at(1.23e-5) == 0.0

    def test_step_edges(self):
        w = Waveform.step(-1.0, 1.0, 5e-6)
        assert w.at(4.999e-6) == -1.0
        assert w.at(5.001e-6) == 1.0

    def test_ramp_endpoints(self):
        w = Waveform.ramp(-0.5, 0.7, 1e-6, 9e-6)
        assert w.at(1e-6) == pytest.approx(-0.5)
        assert w.at(9e-6) == pytest.approx(0.7)
        assert w.at(5e-6) == pytest.approx(0.1)
        assert w.at(0.0) == pytest.approx(-0.5)      # held before the ramp
        assert w.at(2e-5) == pytest.approx(0.7)      # held after


class TestClampSchedule:
    def test_unknown_terminal_rejected(self):
        with pytest.raises(InvariantViolation):
            ClampSchedule(2, ((0.0, 0, FLOAT), (0.0, 1, FLOAT), (1e-6, 5, DRIVE0)))

    def test_initial_level_required(self):
        with pytest.raises(ValueError):
            ClampSchedule(2, ((0.0, 0, FLOAT), (1e-6, 1, DRIVE0)))

    def test_level_series(self):
        sched = ClampSchedule(1, ((0.0, 0, DRIVE1), (5e-9, 0, DRIVE0)))
        levels = sched.levels_for_steps(0, 10, 1e-9)
        assert list(levels[0, :4]) == [DRIVE1] * 4
        assert list(levels[0, 5:]) == [DRIVE0] * 5


def reference_pblock(cfg, mtj, wave, sim):
    """Step-by-step reference built from the public analog/mtj operations."""
    lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
    p_flip = [1 - math.exp(-sim.dt / tau_ap), 1 - math.exp(-sim.dt / tau_p)]
    levels = [lo, hi]
    rng = substream(sim.seed, 0)
    p_occ = tau_p / (tau_p + tau_ap)
    s = 1 if rng.random() < p_occ else 0
    v_filt = levels[s]
    out = cfg.v_ss
    rows = []
    for k in range(sim.n_steps):
        if rng.random() < p_flip[s]:
            s = 1 - s
        v_mtj = levels[s]
        v_filt = rc_filter_step(v_mtj, v_filt, sim.dt, cfg.t_c)
        v_th = threshold_from_input(wave.at((k + 1) * sim.dt), cfg)
        out = comparator(v_filt, v_th, out, cfg)
        if (k + 1) % sim.decim == 0:
            rows.append((s, v_mtj, v_filt, v_th, out))
    return rows


class TestRunPblock:
    def make(self, t_c=2e-6, v_block=0.364, hysteresis=0.0):
        cfg = PBlockConfig(v_block=v_block, r_sense=100.0, t_c=t_c,
                           r1=10000.0, r2=225.93780136277726, r3=219.0622623198257,
                           hysteresis=hysteresis)
        return cfg, MtjParams()

    def test_matches_reference_stepper(self):
        cfg, mtj = self.make()
        sim = SimConfig(duration=2e-5, dt=1e-9, sample_period=1e-7, seed=123)
        trace = run_pblock(cfg, mtj, Waveform.ramp(-0.5, 0.5, 0.0, 2e-5), sim)
        ref = reference_pblock(cfg, mtj, Waveform.ramp(-0.5, 0.5, 0.0, 2e-5), sim)
        for k, (s, v_mtj, v_filt, v_th, out) in enumerate(ref):
            assert trace.mtj_state[0, k] == s
            assert trace.v_mtj[0, k] == pytest.approx(v_mtj, rel=1e-12)
            assert trace.v_filt[0, k] == pytest.approx(v_filt, rel=1e-9)
            assert trace.v_thresh[0, k] == pytest.approx(v_th, rel=1e-12)
            assert trace.v_out[0, k] == out

    def test_matches_reference_with_hysteresis(self):
        cfg, mtj = self.make(hysteresis=2e-3)
        sim = SimConfig(duration=1e-5, dt=1e-9, sample_period=1e-7, seed=9)
        wave = Waveform.constant(0.0)
        trace = run_pblock(cfg, mtj, wave, sim)
        ref = reference_pblock(cfg, mtj, wave, sim)
        assert [r[4] for r in ref] == list(trace.v_out[0])

    def test_frozen_mtj_positive_input_output_low(self):
        # v_block = 0 keeps both dwells at the zero-bias barrier (seconds),
        # the sense signal at 0, and any positive input above it
        cfg, mtj = self.make(v_block=0.0, t_c=0.0)
        sim = SimConfig(duration=1e-5, dt=1e-9, sample_period=1e-6, seed=2)
        trace = run_pblock(cfg, mtj, Waveform.constant(1.0), sim)
        assert np.all(trace.v_out == cfg.v_ss)
        assert np.all(trace.v_mtj == 0.0)

    def test_saturated_negative_input_output_high(self):
        cfg, mtj = self.make()
        sim = SimConfig(duration=1e-4, dt=1e-9, sample_period=1e-6, seed=3)
        trace = run_pblock(cfg, mtj, Waveform.constant(-1.65), sim)
        assert np.all(trace.v_out == cfg.v_dd)
        assert trace.logic().mean() == 1.0

    def test_symmetric_midpoint_half(self):
        cfg, mtj = self.make()
        sim = SimConfig(duration=4e-3, dt=1e-9, sample_period=1e-6, seed=4)
        trace = run_pblock(cfg, mtj, Waveform.constant(0.0), sim)
        n_dwell = 4e-3 / 1e-6
        assert trace.logic().mean() == pytest.approx(0.5, abs=4 * 0.5 / math.sqrt(n_dwell))

    def test_determinism_bit_identical(self):
        cfg, mtj = self.make()
        sim = SimConfig(duration=1e-4, dt=1e-9, sample_period=1e-6, seed=77)
        a = run_pblock(cfg, mtj, Waveform.constant(0.1), sim)
        b = run_pblock(cfg, mtj, Waveform.constant(0.1), sim)
        assert np.array_equal(a.v_filt, b.v_filt)
        assert np.array_equal(a.v_out, b.v_out)
        assert np.array_equal(a.mtj_state, b.mtj_state)

    def test_timestep_guard(self):
        cfg, mtj = self.make(t_c=5e-8)
        with pytest.raises(InvariantViolation):
            run_pblock(cfg, mtj, Waveform.constant(0.0),
                       SimConfig(duration=1e-5, dt=1e-9, sample_period=1e-6))

    def test_analog_bounds(self):
        cfg, mtj = self.make()
        sim = SimConfig(duration=2e-4, dt=1e-9, sample_period=1e-6, seed=5)
        trace = run_pblock(cfg, mtj, Waveform.constant(0.2), sim)
        lo, hi = operating_point(cfg, mtj)[:2]
        assert np.all(np.abs(trace.v_mtj) <= abs(cfg.v_block))
        assert np.all(trace.v_filt >= lo - 1e-12)
        assert np.all(trace.v_filt <= hi + 1e-12)
        assert set(np.unique(trace.v_out)) <= {cfg.v_ss, cfg.v_dd}

    def test_histogram_path_consistent_with_trace(self):
        cfg, mtj = self.make(t_c=0.0)
        sim = SimConfig(duration=2e-3, dt=1e-9, sample_period=1e-6, seed=6)
        edges, counts, occ = run_pblock_histogram(cfg, mtj, sim, n_bins=64)
        # unfiltered signal sits exactly on the two levels
        assert counts[0] + counts[-1] == counts.sum()
        n_dwell = 2e-3 / 1e-6
        assert occ == pytest.approx(0.5, abs=4 * 0.5 / math.sqrt(n_dwell))


def reference_pcircuit(blocks, net, clamps, sim):
    """Reference for the coupled engine: same rules, plain Python."""
    nb = len(blocks)
    consts = []
    rngs = [substream(sim.seed, i) for i in range(nb)]
    states, v_filts, outs = [], [], []
    for i, (cfg, mtj) in enumerate(blocks):
        lo, hi, tau_ap, tau_p = operating_point(cfg, mtj)
        consts.append((cfg, [1 - math.exp(-sim.dt / tau_ap), 1 - math.exp(-sim.dt / tau_p)], [lo, hi]))
        p_occ = tau_p / (tau_p + tau_ap)
        s = 1 if rngs[i].random() < p_occ else 0
        states.append(s)
        v_filts.append([lo, hi][s])
        outs.append(cfg.v_ss)

    def thresholds(outs_now, level_now):
        th = []
        for i, (cfg, _, _) in enumerate(consts):
            taps = []
            for t in net.taps:
                if t.node != i:
                    continue
                if t.kind == TAP_Q:
                    taps.append(SourceTap(outs_now[t.ref], t.conductance))
                elif t.kind == TAP_QBAR:
                    taps.append(SourceTap(net.v_dd + net.v_ss - outs_now[t.ref], t.conductance))
                elif t.kind == TAP_VDD:
                    taps.append(SourceTap(net.v_dd, t.conductance))
                elif t.kind == TAP_VSS:
                    taps.append(SourceTap(net.v_ss, t.conductance))
                elif t.kind == TAP_CLAMP:
                    lvl = level_now[t.ref]
                    if lvl == FLOAT:
                        continue
                    taps.append(SourceTap(net.v_dd if lvl == DRIVE0 else net.v_ss, t.conductance))
            node_v = millman_node(taps) if taps else 0.0
            th.append(threshold_from_input(node_v, cfg))
        return th

    rows = []
    level_all = clamps.levels_for_steps(0, sim.n_steps, sim.dt)
    th = thresholds(outs, level_all[:, 0])
    prev_levels = list(level_all[:, 0])
    for k in range(sim.n_steps):
        levels_now = list(level_all[:, k])
        if levels_now != prev_levels:
            th = thresholds(outs, levels_now)
            prev_levels = levels_now
        tentative = []
        for i, (cfg, p_flip, lv) in enumerate(consts):
            if rngs[i].random() < p_flip[states[i]]:
                states[i] = 1 - states[i]
            v_filts[i] = rc_filter_step(lv[states[i]], v_filts[i], sim.dt, cfg.t_c)
            tentative.append(comparator(v_filts[i], th[i], outs[i], cfg))
        changers = [i for i in range(nb) if tentative[i] != outs[i]]
        if changers:
            win = max(changers, key=lambda i: abs(v_filts[i] - th[i]))
            outs[win] = tentative[win]
            th = thresholds(outs, levels_now)
        if (k + 1) % sim.decim == 0:
            rows.append((list(states), list(v_filts), list(th), list(outs)))
    return rows


@pytest.fixture(scope="module")
def setup(cfg):
    return cfg.blocks(), cfg.network()


class TestRunPcircuit:
    def test_matches_reference(self, setup):
        blocks, net = setup
        sched = ClampSchedule(3, ((0.0, 0, FLOAT), (0.0, 1, DRIVE1), (0.0, 2, FLOAT),
                                  (1e-5, 1, FLOAT)))
        sim = SimConfig(duration=3e-5, dt=2e-9, sample_period=2e-7, seed=321)
        trace = run_pcircuit(blocks, net, sched, sim)
        ref = reference_pcircuit(blocks, net, sched, sim)
        for k, (states, v_filts, th, outs) in enumerate(ref):
            assert list(trace.mtj_state[:, k]) == states
            np.testing.assert_allclose(trace.v_filt[:, k], v_filts, rtol=1e-9)
            np.testing.assert_allclose(trace.v_thresh[:, k], th, rtol=1e-9)
            assert list(trace.v_out[:, k]) == outs, k

    def test_all_driven_pins_within_ten_steps(self, setup):
        blocks, net = setup
        sched = ClampSchedule.from_clamps([Clamp.ZERO, Clamp.ZERO, Clamp.ZERO])
        sim = SimConfig(duration=2e-7, dt=2e-9, sample_period=2e-8, seed=8)
        trace = run_pcircuit(blocks, net, sched, sim)
        # logic 0 everywhere from the tenth step on
        assert np.all(trace.v_out[:, 9:] == blocks[0][0].v_ss)

    def test_clamp_dominance_fraction(self, setup):
        blocks, net = setup
        sched = ClampSchedule.from_clamps([Clamp.ONE, Clamp.FREE, Clamp.FREE])
        sim = SimConfig(duration=2e-3, dt=2e-9, sample_period=2e-6, seed=9)
        trace = run_pcircuit(blocks, net, sched, sim)
        held = (trace.logic()[0] == 1).mean()
        assert held >= 0.999

    def test_zero_coupling_independent_blocks(self, cfg):
        from pbitsim.ising import IsingSpec
        blocks = cfg.blocks()
        net = ising_to_network(IsingSpec(np.zeros((3, 3)), np.zeros(3)), 1e4)
        sched = ClampSchedule.from_clamps([Clamp.FREE] * 3)
        sim = SimConfig(duration=3e-2, dt=2e-9, sample_period=5e-6, seed=10)
        trace = run_pcircuit(blocks, net, sched, sim)
        logic = trace.logic()
        joint = StateHistogram.from_counts(np.bincount(trace.codes(), minlength=8))
        marg = [logic[b].mean() for b in range(3)]
        product = np.array([
            (marg[0] if a else 1 - marg[0])
            * (marg[1] if b else 1 - marg[1])
            * (marg[2] if c else 1 - marg[2])
            for a in (0, 1) for b in (0, 1) for c in (0, 1)])
        # bincount order: index abc with a the most significant bit
        product = product.reshape(2, 2, 2).ravel()
        assert tv_distance(joint.freqs, product) < 0.05

    def test_unknown_terminal_rejected(self, setup):
        blocks, net = setup
        with pytest.raises(InvariantViolation):
            sched = ClampSchedule(3, ((0.0, 0, FLOAT), (0.0, 1, FLOAT), (0.0, 2, FLOAT),
                                      (1e-6, 4, DRIVE0)))

    def test_determinism(self, setup):
        blocks, net = setup
        sched = ClampSchedule.from_clamps([Clamp.FREE] * 3)
        sim = SimConfig(duration=1e-4, dt=2e-9, sample_period=1e-6, seed=11)
        a = run_pcircuit(blocks, net, sched, sim)
        b = run_pcircuit(blocks, net, sched, sim)
        assert np.array_equal(a.v_out, b.v_out)
        assert np.array_equal(a.v_filt, b.v_filt)


class TestTrace:
    def test_csv_schema(self, cfg, tmp_path):
        blocks = cfg.blocks()
        net = cfg.network()
        sched = ClampSchedule.from_clamps([Clamp.ZERO, Clamp.FREE, Clamp.ONE])
        sim = SimConfig(duration=1e-5, dt=2e-9, sample_period=1e-6, seed=12)
        trace = run_pcircuit(blocks, net, sched, sim)
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "time_s,blk,mtj_state,v_mtj,v_filt,v_thresh,v_out,clamp_A,clamp_B,clamp_C"
        assert len(lines) == 1 + 3 * sim.n_samples
        first = lines[1].split(",")
        assert first[1] == "0"
        assert first[2] in ("P", "AP")
        assert first[7:] == ["0", "n", "1"]

    def test_codes_bit_order(self):
        # block 0 is the most significant bit of the code
        times = np.array([1e-6])
        shape = (3, 1)
        trace = Trace(times,
                      np.zeros(shape, dtype=np.int8), np.zeros(shape), np.zeros(shape),
                      np.zeros(shape),
                      np.array([[1.65], [-1.65], [1.65]]),
                      np.zeros(shape), np.zeros(shape),
                      np.full((3, 1), FLOAT, dtype=np.int8))
        assert trace.codes()[0] == 0b101

    def test_vout_window_extremes(self, cfg):
        pb, mtj = cfg.pblock(), cfg.mtj()
        sim = SimConfig(duration=2e-4, dt=1e-9, sample_period=2e-6, seed=13)
        trace = run_pblock(pb, mtj, Waveform.constant(0.0), sim)
        assert np.all(trace.v_out_min <= trace.v_out)
        assert np.all(trace.v_out_max >= trace.v_out)
        # a fair-coin run must show excursions inside at least one window
        assert np.any(trace.v_out_min < trace.v_out_max)
