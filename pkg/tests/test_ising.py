import itertools
import math

import numpy as np
import pytest

from pbitsim.histogram import StateHistogram, code_str, tv_distance
from pbitsim.ising import (Clamp, IsingSpec, boltzmann_oracle, energy, free_clamps,
                           gibbs_sample, local_field, pbit_update)
from pbitsim.synthesis import and_gate_spec


def brute_force_distribution(J, h, gain, pinned=None):
    """Independent enumeration with the explicit literal energy sum."""
    n = len(h)
    weights = []
    for bits in itertools.product([0, 1], repeat=n):
        m = [2 * b - 1 for b in bits]
        if pinned and any(m[i] != s for i, s in pinned.items()):
            weights.append(0.0)
            continue
        e = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                e -= J[i][j] * m[i] * m[j]
            e -= h[i] * m[i]
        weights.append(math.exp(-gain * e))
    total = sum(weights)
    return np.array([w / total for w in weights])


class TestLocalField:
    def test_decoupled_bias_only(self):
        spec = IsingSpec(np.zeros((2, 2)), np.array([0.5, -0.25]))
        for m in ([1, 1], [-1, 1], [1, -1], [-1, -1]):
            assert local_field(0, np.array(m), spec) == 0.5

    def test_single_coupling_term(self):
        spec = IsingSpec(np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros(2))
        assert local_field(0, np.array([-1, 1]), spec) == 1.0

    def test_and_spec_field_at_all_ones(self):
        spec = and_gate_spec()
        assert local_field(2, np.array([1, 1, 1]), spec) == pytest.approx(2.0)

    def test_bad_index(self):
        spec = and_gate_spec()
        with pytest.raises(ValueError):
            local_field(5, np.array([1, 1, 1]), spec)


class TestPbitUpdate:
    def test_zero_field_is_fair(self):
        spec = IsingSpec(np.zeros((1, 1)), np.zeros(1))
        rng = np.random.default_rng(0)
        ups = sum(pbit_update(0, np.array([-1], dtype=np.int8), spec, rng)[0] == 1
                  for _ in range(100_000))
        assert ups / 100_000 == pytest.approx(0.5, abs=0.006)

    def test_saturated_field(self):
        spec = IsingSpec(np.zeros((1, 1)), np.array([500.0]))
        rng = np.random.default_rng(1)
        for _ in range(200):
            assert pbit_update(0, np.array([-1], dtype=np.int8), spec, rng)[0] == 1

    def test_tanh_mean(self):
        # closed form: E[m] = tanh(beta * i0 * I) at I = 1
        spec = IsingSpec(np.zeros((1, 1)), np.array([1.0]))
        rng = np.random.default_rng(2)
        n = 1_000_000
        draws = rng.random(n)
        p_plus = 0.5 * (1 + math.tanh(1.0))
        mean = (2.0 * (draws < p_plus) - 1.0).mean()
        sigma = math.sqrt((1 - math.tanh(1.0) ** 2) / n)
        assert mean == pytest.approx(math.tanh(1.0), abs=4 * sigma)
        # and the module path agrees on a smaller sample
        rng = np.random.default_rng(2)
        vals = [pbit_update(0, np.array([-1], dtype=np.int8), spec, rng)[0]
                for _ in range(50_000)]
        assert np.mean(vals) == pytest.approx(math.tanh(1.0), abs=4e-2)

    def test_clamped_update_rejected(self):
        spec = and_gate_spec()
        rng = np.random.default_rng(3)
        clamps = (Clamp.ONE, Clamp.FREE, Clamp.FREE)
        with pytest.raises(ValueError):
            pbit_update(0, np.array([1, 1, 1], dtype=np.int8), spec, rng, clamps)


class TestOracle:
    def test_single_free_node_fair(self):
        spec = IsingSpec(np.zeros((1, 1)), np.zeros(1))
        assert boltzmann_oracle(spec) == pytest.approx([0.5, 0.5])

    def test_and_spec_frozen_values(self):
        spec = and_gate_spec()
        probs = boltzmann_oracle(spec)
        # frozen from the 8-state enumeration of the shipped couplings
        legal_idx = [0b000, 0b010, 0b100, 0b111]
        for i in legal_idx:
            assert probs[i] == pytest.approx(0.246612, abs=1e-6)
        for i in (0b011, 0b101, 0b110):
            assert probs[i] == pytest.approx(0.00451686, abs=1e-7)
        assert probs[0b001] == pytest.approx(1.5152e-6, rel=1e-3)

    def test_matches_independent_enumeration(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            n = int(rng.integers(1, 4))
            J = rng.normal(size=(n, n))
            J = (J + J.T) / 2
            np.fill_diagonal(J, 0.0)
            h = rng.normal(size=n)
            gain = float(rng.uniform(0.2, 1.5))
            spec = IsingSpec(J, h, i0=gain, beta=1.0)
            expected = brute_force_distribution(J.tolist(), h.tolist(), gain)
            assert boltzmann_oracle(spec) == pytest.approx(expected, rel=1e-10)

    def test_clamp_consistency_and_conditional(self):
        spec = and_gate_spec()
        clamps = (Clamp.FREE, Clamp.FREE, Clamp.ONE)
        probs = boltzmann_oracle(spec, clamps)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        for idx in range(8):
            if code_str(idx, 3)[2] == "0":
                assert probs[idx] == 0.0
        assert probs[0b111] == pytest.approx(0.9646574, abs=1e-6)

    def test_all_clamped_single_state(self):
        spec = and_gate_spec()
        clamps = (Clamp.ONE, Clamp.ZERO, Clamp.ONE)
        probs = boltzmann_oracle(spec, clamps)
        assert probs[0b101] == 1.0
        assert probs.sum() == 1.0

    def test_global_flip_symmetry(self):
        # negating h maps the distribution by a global spin flip
        rng = np.random.default_rng(4)
        J = rng.normal(size=(3, 3))
        J = (J + J.T) / 2
        np.fill_diagonal(J, 0.0)
        h = rng.normal(size=3)
        p_plus = boltzmann_oracle(IsingSpec(J, h))
        p_minus = boltzmann_oracle(IsingSpec(J, -h))
        assert p_minus == pytest.approx(p_plus[::-1], rel=1e-10)

    def test_sum_to_one(self):
        spec = and_gate_spec(beta=2.5)
        assert boltzmann_oracle(spec).sum() == pytest.approx(1.0, abs=1e-12)

    def test_too_large_rejected(self):
        n = 21
        spec = IsingSpec(np.zeros((n, n)), np.zeros(n))
        with pytest.raises(ValueError):
            boltzmann_oracle(spec)


class TestEnergy:
    def test_and_gate_table(self):
        spec = and_gate_spec()
        # legal codes all at -3, illegal at +1 except 001 at +9
        expected = {0b000: -3, 0b010: -3, 0b100: -3, 0b111: -3,
                    0b011: 1, 0b101: 1, 0b110: 1, 0b001: 9}
        for idx, e in expected.items():
            m = np.array([1 if c == "1" else -1 for c in code_str(idx, 3)])
            assert energy(m, spec) == pytest.approx(e)


class TestGibbs:
    def test_single_free_node_fair_coin(self):
        spec = IsingSpec(np.zeros((1, 1)), np.zeros(1))
        hist = gibbs_sample(spec, free_clamps(1), 200_000, np.random.default_rng(0))
        assert hist.freqs[0] == pytest.approx(0.5, abs=0.01)

    def test_all_clamped_forced_state(self):
        spec = and_gate_spec()
        clamps = (Clamp.ZERO, Clamp.ONE, Clamp.ZERO)
        hist = gibbs_sample(spec, clamps, 100, np.random.default_rng(1))
        assert hist.freqs[0b010] == 1.0
        assert hist.n_samples == 100

    def test_clamped_nodes_never_move(self):
        spec = and_gate_spec()
        clamps = (Clamp.ONE, Clamp.FREE, Clamp.FREE)
        hist = gibbs_sample(spec, clamps, 50_000, np.random.default_rng(2))
        mass_a1 = sum(hist.freqs[i] for i in range(8) if code_str(i, 3)[0] == "1")
        assert mass_a1 == 1.0

    def test_conditional_matches_oracle(self):
        spec = and_gate_spec()
        clamps = (Clamp.FREE, Clamp.FREE, Clamp.ONE)
        hist = gibbs_sample(spec, clamps, 1_000_000, np.random.default_rng(3))
        assert hist.freqs[0b111] == pytest.approx(0.9647, abs=0.01)

    def test_free_run_legal_frequencies(self):
        spec = and_gate_spec()
        hist = gibbs_sample(spec, free_clamps(3), 1_000_000, np.random.default_rng(4))
        for idx in (0b000, 0b010, 0b100, 0b111):
            assert hist.freqs[idx] == pytest.approx(0.2466, abs=0.01)

    def test_tv_to_oracle_small_specs(self):
        # sequential updates must reproduce the enumerated stationary law on
        # moderate specs; five fixed sampler seeds per spec
        specs = [
            and_gate_spec(),
            IsingSpec(np.zeros((3, 3)), np.array([0.5, -0.3, 0.8])),
            IsingSpec(np.array([[0.0, 1.2, 0.0], [1.2, 0.0, -0.7], [0.0, -0.7, 0.0]]),
                      np.array([0.1, 0.0, -0.2]), i0=1.5),
            IsingSpec(np.array([[0.0, -2.0, 0.5], [-2.0, 0.0, 1.0], [0.5, 1.0, 0.0]]),
                      np.array([2.0, -1.0, 0.0]), beta=0.75),
        ]
        for spec in specs:
            target = boltzmann_oracle(spec)
            for seed in range(5):
                hist = gibbs_sample(spec, free_clamps(spec.n), 1_000_000,
                                    np.random.default_rng(seed))
                assert tv_distance(hist.freqs, target) < 0.02, (spec.h, seed)

    def test_spin_flip_symmetry_within_ci(self):
        spec = and_gate_spec()
        h1 = gibbs_sample(spec, (Clamp.ZERO, Clamp.FREE, Clamp.FREE), 400_000,
                          np.random.default_rng(5))
        flipped = IsingSpec(spec.J, -spec.h, i0=spec.i0, beta=spec.beta)
        h2 = gibbs_sample(flipped, (Clamp.ONE, Clamp.FREE, Clamp.FREE), 400_000,
                          np.random.default_rng(6))
        assert tv_distance(h1.freqs, h2.freqs[::-1]) < 0.01

    def test_determinism(self):
        spec = and_gate_spec()
        a = gibbs_sample(spec, free_clamps(3), 20_000, np.random.default_rng(7))
        b = gibbs_sample(spec, free_clamps(3), 20_000, np.random.default_rng(7))
        assert np.array_equal(a.freqs, b.freqs)


class TestHistogramType:
    def test_frequencies_sum_and_legality(self):
        counts = np.array([5, 0, 3, 0, 2, 0, 0, 10])
        hist = StateHistogram.from_counts(counts, {"000", "010", "100", "111"})
        assert hist.freqs.sum() == pytest.approx(1.0, abs=1e-12)
        assert hist.legal[0b000] and hist.legal[0b111]
        assert not hist.legal[0b001]
        assert hist.n_samples == 20

    def test_marginal(self):
        counts = np.zeros(8, dtype=int)
        counts[0b111] = 3
        counts[0b011] = 1
        hist = StateHistogram.from_counts(counts)
        assert hist.marginal(0) == pytest.approx(0.75)
        assert hist.marginal(1) == 1.0

    def test_modal_ties(self):
        hist = StateHistogram.from_counts(np.array([4, 4, 0, 0]))
        assert hist.modal_codes() == {"00", "01"}

    def test_tv_identity(self):
        p = np.array([0.5, 0.5])
        assert tv_distance(p, p) == 0.0
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
