"""Relative-frequency histograms over n-bit logic codes, and comparison metrics.

Codes are strings like '101' ordered node 0 first (node 0 is the most
significant bit of the integer index), matching the [ABC] readout order of a
three-terminal gate.  Logic '1' maps to spin +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def code_str(index: int, n: int) -> str:
    """Integer state index -> n-bit code string, node 0 first."""
    return format(index, f"0{n}b")


def code_index(code: str) -> int:
    """Code string -> integer state index."""
    return int(code, 2)


def spins_to_index(m: np.ndarray) -> int:
    """Spin vector (+-1, node 0 first) -> integer state index."""
    idx = 0
    for s in m:
        idx = (idx << 1) | (1 if s > 0 else 0)
    return idx


def index_to_spins(index: int, n: int) -> np.ndarray:
    """Integer state index -> spin vector of +-1."""
    return np.array([1 if c == "1" else -1 for c in code_str(index, n)], dtype=np.int8)


def tv_distance(p, q) -> float:
    """Total variation distance: half the L1 distance between distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass
class StateHistogram:
    """Relative frequencies over all 2**n codes of an n-node system.

    ``legal`` flags come solely from a declared legal set, never from the
    frequencies themselves.  ``n_samples`` is the raw sample count behind the
    frequencies.
    """

    n: int
    freqs: np.ndarray
    n_samples: int
    legal: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        if self.freqs.shape != (2 ** self.n,):
            raise ValueError(f"expected {2**self.n} frequencies, got {self.freqs.shape}")
        if self.n_samples > 0 and abs(self.freqs.sum() - 1.0) > 1e-9:
            raise ValueError(f"frequencies sum to {self.freqs.sum()}, not 1")
        if self.legal is not None:
            self.legal = np.asarray(self.legal, dtype=bool)
            if self.legal.shape != self.freqs.shape:
                raise ValueError("legality mask shape mismatch")

    @classmethod
    def from_counts(cls, counts, legal_set: set[str] | None = None) -> "StateHistogram":
        counts = np.asarray(counts, dtype=np.int64)
        n = int(np.log2(len(counts)))
        if 2 ** n != len(counts):
            raise ValueError("counts length must be a power of two")
        total = int(counts.sum())
        freqs = counts / total if total > 0 else np.zeros(len(counts))
        legal = None
        if legal_set is not None:
            legal = np.array([code_str(i, n) in legal_set for i in range(2 ** n)])
        return cls(n=n, freqs=freqs, n_samples=total, legal=legal)

    def codes(self) -> list[str]:
        return [code_str(i, self.n) for i in range(2 ** self.n)]

    def freq_of(self, code: str) -> float:
        return float(self.freqs[code_index(code)])

    def marginal(self, node: int) -> float:
        """Frequency of logic '1' at one node."""
        mask = [(i >> (self.n - 1 - node)) & 1 for i in range(2 ** self.n)]
        return float(np.dot(self.freqs, mask))

    def modal_codes(self, rtol: float = 1e-9) -> set[str]:
        """Codes within relative tolerance of the maximum frequency (tie-aware)."""
        top = self.freqs.max()
        return {code_str(i, self.n) for i in np.flatnonzero(self.freqs >= top * (1.0 - rtol))}

    def tv_to(self, other) -> float:
        q = other.freqs if isinstance(other, StateHistogram) else other
        return tv_distance(self.freqs, q)
