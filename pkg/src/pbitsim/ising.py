"""Idealized binary stochastic network: the behavior the hardware realizes.

A node resamples to +1 with probability (1 + tanh(beta * i0 * I)) / 2, where
I is its local field h_i + sum_j J_ij m_j.  Sequential single-node updates of
that rule have the Boltzmann distribution exp(-beta * i0 * E) as stationary
law, with E(m) = -sum_{i<j} J_ij m_i m_j - sum_i h_i m_i.  The exact
enumeration of that law over all 2**n states is the verification oracle for
the device-level simulation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .histogram import StateHistogram, index_to_spins, spins_to_index

MAX_ORACLE_NODES = 20


class Clamp(enum.IntEnum):
    """Per-node clamp status. ZERO pins logic '0' (spin -1), ONE pins '1' (+1)."""

    FREE = 0
    ZERO = 1
    ONE = 2

    @property
    def spin(self) -> int:
        if self is Clamp.FREE:
            raise ValueError("free node has no pinned spin")
        return 1 if self is Clamp.ONE else -1


@dataclass(frozen=True)
class IsingSpec:
    """Symmetric coupling matrix J (zero diagonal), bias vector h, gain knobs.

    ``i0`` is the input gain and ``beta`` the inverse temperature; only their
    product enters the dynamics, but they are kept separate because divider
    attenuation and noise temperature are distinct hardware quantities.
    """

    J: np.ndarray
    h: np.ndarray
    i0: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be square")
        if h.shape != (J.shape[0],):
            raise ValueError("h length must match J")
        if J.shape[0] < 1:
            raise ValueError("need at least one node")
        if not np.allclose(J, J.T, atol=0.0):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(J) != 0.0):
            raise ValueError("J must have zero diagonal")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.J.shape[0]

    def with_gain(self, beta: float | None = None, i0: float | None = None) -> "IsingSpec":
        return IsingSpec(self.J, self.h,
                         i0=self.i0 if i0 is None else i0,
                         beta=self.beta if beta is None else beta)

    def scaled(self, factor: float) -> "IsingSpec":
        """Scale J and h together by a positive factor."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return IsingSpec(self.J * factor, self.h * factor, i0=self.i0, beta=self.beta)


def free_clamps(n: int) -> tuple[Clamp, ...]:
    return tuple(Clamp.FREE for _ in range(n))


def clamped_spins(clamps: tuple[Clamp, ...]) -> list[tuple[int, int]]:
    """(node, spin) pairs for every non-free node."""
    return [(i, c.spin) for i, c in enumerate(clamps) if c is not Clamp.FREE]


def local_field(i: int, m: np.ndarray, spec: IsingSpec) -> float:
    """I_i = h_i + sum_j J_ij m_j."""
    if not 0 <= i < spec.n:
        raise ValueError(f"node index {i} out of range")
    return float(spec.h[i] + spec.J[i] @ m)


def pbit_update(i: int, m: np.ndarray, spec: IsingSpec, rng: np.random.Generator,
                clamps: tuple[Clamp, ...] | None = None) -> np.ndarray:
    """Resample node i from the sigmoid of its local field; one uniform draw.

    Rejects updates on clamped nodes when a clamp spec is supplied.
    """
    if clamps is not None and clamps[i] is not Clamp.FREE:
        raise ValueError(f"node {i} is clamped and cannot be updated")
    gain = spec.beta * spec.i0
    p_plus = 0.5 * (1.0 + np.tanh(gain * local_field(i, m, spec)))
    out = m.copy()
    out[i] = 1 if rng.random() < p_plus else -1
    return out


def energy(m: np.ndarray, spec: IsingSpec) -> float:
    """E(m) = -sum_{i<j} J_ij m_i m_j - h . m  (gain factors excluded)."""
    mf = np.asarray(m, dtype=float)
    return float(-0.5 * mf @ spec.J @ mf - spec.h @ mf)


def boltzmann_oracle(spec: IsingSpec, clamps: tuple[Clamp, ...] | None = None) -> np.ndarray:
    """Exact stationary distribution over all 2**n states by enumeration.

    Probability exp(-beta*i0*E) restricted to clamp-consistent states and
    renormalized; clamp-inconsistent states get exactly zero.
    """
    n = spec.n
    if n > MAX_ORACLE_NODES:
        raise ValueError(f"enumeration limited to {MAX_ORACLE_NODES} nodes, got {n}")
    if clamps is None:
        clamps = free_clamps(n)
    if len(clamps) != n:
        raise ValueError("clamp list length must match node count")
    gain = spec.beta * spec.i0
    pinned = clamped_spins(clamps)

    energies = np.empty(2 ** n)
    consistent = np.ones(2 ** n, dtype=bool)
    for idx in range(2 ** n):
        m = index_to_spins(idx, n)
        for node, s in pinned:
            if m[node] != s:
                consistent[idx] = False
                break
        energies[idx] = energy(m, spec)

    weights = np.where(consistent, np.exp(-gain * (energies - energies[consistent].min())), 0.0)
    return weights / weights.sum()


def gibbs_sample(spec: IsingSpec, clamps: tuple[Clamp, ...], sweeps: int,
                 rng: np.random.Generator) -> StateHistogram:
    """Sequential Gibbs sampling; one recorded state per sweep.

    Each sweep visits the free nodes in a fresh random order; clamped nodes
    never change.  All randomness (initial state, visit orders, update draws)
    comes from ``rng``, so a seed fixes the full trajectory.
    """
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    n = spec.n
    if len(clamps) != n:
        raise ValueError("clamp list length must match node count")

    m = np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)
    for node, s in clamped_spins(clamps):
        m[node] = s
    free = np.array([i for i, c in enumerate(clamps) if c is Clamp.FREE], dtype=np.int64)

    counts = np.zeros(2 ** n, dtype=np.int64)
    if len(free) == 0:
        counts[spins_to_index(m)] = sweeps
        return StateHistogram.from_counts(counts)

    # Visit orders as argsorted uniform keys, update draws as a flat block;
    # both from the same stream, consumed in a fixed order.
    orders = np.argsort(rng.random((sweeps, len(free))), axis=1).astype(np.int64)
    draws = rng.random((sweeps, len(free)))

    from ._kernels import gibbs_kernel

    gibbs_kernel(spec.J, spec.h, spec.beta * spec.i0, m.astype(np.int8),
                 free, orders, draws, counts)
    return StateHistogram.from_counts(counts)
