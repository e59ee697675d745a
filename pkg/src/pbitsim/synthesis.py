"""Coupling-network synthesis for invertible gates.

Translates an Ising specification (J, h) into a resistor network feeding each
p-block input.  A resistive network only has positive conductances, so
coupling sign is realized by source selection: the comparator exposes both a
true output Q and a complement Qbar, and because the p-block transfer is
inverting (raising the input lowers the output average), positive couplings
tap Qbar and positive biases tap the low rail.  Balanced resistor pairs to
both rails pad every input to a common total conductance so all nodes see
the same gain, and each input also carries a clamp-terminal resistor.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .ising import IsingSpec, Clamp, boltzmann_oracle
from .histogram import code_str, index_to_spins

# Tap source kinds; numeric values shared with the compiled engine kernels.
TAP_Q = 0
TAP_QBAR = 1
TAP_VDD = 2
TAP_VSS = 3
TAP_CLAMP = 4

_KIND_NAMES = {TAP_Q: "q", TAP_QBAR: "qbar", TAP_VDD: "vdd", TAP_VSS: "vss", TAP_CLAMP: "clamp"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}

AND_LEGAL_SET = frozenset({"000", "010", "100", "111"})


@dataclass(frozen=True)
class Tap:
    """One resistive path into a p-block input node.

    ``kind`` selects the source: a block's comparator output (q), its
    complement (qbar), one of the rails, or a clamp terminal.  ``ref`` is the
    source block or terminal index (-1 for rails).
    """

    node: int
    kind: int
    ref: int
    conductance: float

    def __post_init__(self):
        if self.conductance <= 0:
            raise ValueError("tap conductance must be positive")
        if self.kind not in _KIND_NAMES:
            raise ValueError(f"unknown tap kind {self.kind}")

    def source_name(self) -> str:
        name = _KIND_NAMES[self.kind]
        return name if self.ref < 0 else f"{name}:{self.ref}"


@dataclass(frozen=True)
class CouplingNetwork:
    """All taps of a synthesized circuit plus rails and clamp resistors."""

    n: int
    taps: tuple[Tap, ...]
    clamp_r: float
    v_dd: float = 1.65
    v_ss: float = -1.65

    def __post_init__(self):
        for t in self.taps:
            if not 0 <= t.node < self.n:
                raise ValueError(f"tap node {t.node} out of range")
            if t.kind in (TAP_Q, TAP_QBAR):
                if not 0 <= t.ref < self.n:
                    raise ValueError(f"tap source block {t.ref} out of range")
                if t.ref == t.node:
                    raise ValueError("self-coupling tap is not allowed")

    def taps_of(self, node: int) -> list[Tap]:
        return [t for t in self.taps if t.node == node]


def and_gate_spec(i0: float = 1.0, beta: float = 1.0) -> IsingSpec:
    """Three-node spec whose degenerate ground states are exactly C = A AND B.

    Couplings J_AB = -1, J_AC = J_BC = 2 with biases h = (1, 1, -2) put the
    four legal codes {000, 010, 100, 111} at equal minimum energy and every
    violating code strictly above (gap 4).
    """
    J = np.array([[0.0, -1.0, 2.0],
                  [-1.0, 0.0, 2.0],
                  [2.0, 2.0, 0.0]])
    h = np.array([1.0, 1.0, -2.0])
    return IsingSpec(J, h, i0=i0, beta=beta)


@dataclass(frozen=True)
class GroundCheck:
    """Energy audit of a spec against a legal set."""

    passed: bool
    energies: np.ndarray          # over all 2**n codes
    legal_energy: float | None
    gap: float | None             # min illegal energy - legal energy
    degenerate: bool
    codes: tuple[str, ...]
    legal: tuple[bool, ...]

    def table(self) -> str:
        buf = io.StringIO()
        buf.write("code  energy      legal\n")
        for c, e, lg in zip(self.codes, self.energies, self.legal):
            buf.write(f"{c}   {e:+10.4f}  {'yes' if lg else 'no'}\n")
        if self.gap is not None:
            buf.write(f"gap above ground: {self.gap:.6g}\n")
        return buf.getvalue()


def verify_degenerate_ground(spec: IsingSpec, legal: frozenset[str] | set[str],
                             tol: float = 1e-9) -> GroundCheck:
    """Check that the legal codes are exactly the degenerate energy minima.

    Passes iff all legal-state energies are equal and every illegal state
    sits strictly higher; the reported gap is the margin.
    """
    n = spec.n
    if n > 20:
        raise ValueError("enumeration limited to 20 nodes")
    from .ising import energy

    codes = tuple(code_str(i, n) for i in range(2 ** n))
    legal_mask = tuple(c in legal for c in codes)
    if not any(legal_mask) or all(legal_mask):
        raise ValueError("legal set must be a proper non-empty subset of all codes")
    energies = np.array([energy(index_to_spins(i, n), spec) for i in range(2 ** n)])
    e_legal = energies[np.array(legal_mask)]
    e_illegal = energies[~np.array(legal_mask)]
    degenerate = float(e_legal.max() - e_legal.min()) <= tol
    legal_energy = float(e_legal[0]) if degenerate else None
    gap = float(e_illegal.min() - e_legal.max())
    passed = degenerate and gap > tol
    return GroundCheck(passed=passed, energies=energies,
                       legal_energy=legal_energy, gap=gap,
                       degenerate=degenerate, codes=codes, legal=legal_mask)


def ising_to_network(spec: IsingSpec, r_unit: float, clamp_r: float | None = None,
                     v_dd: float = 1.65, v_ss: float = -1.65,
                     equalize: bool = True) -> CouplingNetwork:
    """Realize (J, h) as conductances in units of 1/r_unit.

    Per ordered pair (i, j) with J_ij != 0: a tap at input i of conductance
    |J_ij|/r_unit from Qbar(j) for positive coupling, Q(j) for negative (the
    Qbar cross-over folds the block's inverting transfer into the wiring).
    Per node with h_i != 0: a rail tap of conductance |h_i|/r_unit, to the
    low rail for positive bias.  Every input gets its clamp-terminal tap
    (default resistor r_unit/10, strong enough to dominate the node when
    driven).  With ``equalize`` the inputs are padded by balanced rail pairs
    up to a common total coupling conductance, so every free node maps its
    local field through the same attenuation.
    """
    if r_unit <= 0:
        raise ValueError("r_unit must be positive")
    if clamp_r is None:
        clamp_r = r_unit / 10.0
    if clamp_r <= 0:
        raise ValueError("clamp resistance must be positive")
    n = spec.n
    taps: list[Tap] = []
    weights = np.abs(spec.J).sum(axis=1) + np.abs(spec.h)
    target = float(weights.max())
    for i in range(n):
        for j in range(n):
            Jij = spec.J[i, j]
            if i == j or Jij == 0.0:
                continue
            kind = TAP_QBAR if Jij > 0 else TAP_Q
            taps.append(Tap(i, kind, j, abs(Jij) / r_unit))
        hi = spec.h[i]
        if hi != 0.0:
            kind = TAP_VSS if hi > 0 else TAP_VDD
            taps.append(Tap(i, kind, -1, abs(hi) / r_unit))
        if equalize:
            pad = (target - float(weights[i])) / 2.0
            if pad > 0.0:
                taps.append(Tap(i, TAP_VDD, -1, pad / r_unit))
                taps.append(Tap(i, TAP_VSS, -1, pad / r_unit))
        taps.append(Tap(i, TAP_CLAMP, i, 1.0 / clamp_r))
    return CouplingNetwork(n=n, taps=tuple(taps), clamp_r=clamp_r, v_dd=v_dd, v_ss=v_ss)


def network_to_ising(net: CouplingNetwork, r_unit: float) -> IsingSpec:
    """Invert the encoding: recover (J, h) from tap conductances.

    Rail taps combine as a signed sum (low rail positive), so balanced
    equalization pairs cancel exactly.  Taps that match no encoding rule are
    rejected.
    """
    if r_unit <= 0:
        raise ValueError("r_unit must be positive")
    n = net.n
    J = np.zeros((n, n))
    h = np.zeros(n)
    for t in net.taps:
        w = t.conductance * r_unit
        if t.kind == TAP_QBAR:
            J[t.node, t.ref] += w
        elif t.kind == TAP_Q:
            J[t.node, t.ref] -= w
        elif t.kind == TAP_VSS:
            h[t.node] += w
        elif t.kind == TAP_VDD:
            h[t.node] -= w
        elif t.kind == TAP_CLAMP:
            continue
        else:
            raise ValueError(f"tap {t} matches no encoding rule")
    if not np.allclose(J, J.T, rtol=1e-12, atol=0.0):
        raise ValueError("recovered couplings are not symmetric; not an encoded network")
    return IsingSpec(J, h)


def modal_set(spec: IsingSpec, clamps: tuple[Clamp, ...] | None = None,
              rtol: float = 1e-9) -> set[str]:
    """Most-probable codes of the exact distribution (ties included)."""
    probs = boltzmann_oracle(spec, clamps)
    top = probs.max()
    return {code_str(i, spec.n) for i in np.flatnonzero(probs >= top * (1.0 - rtol))}


def save_network(net: CouplingNetwork, path) -> None:
    """Write the tap list as a line-oriented text file (re-importable)."""
    with open(path, "w") as f:
        f.write("# coupling network\n")
        f.write(f"nodes = {int(net.n)}\n")
        f.write(f"vdd = {float(net.v_dd)!r}\n")
        f.write(f"vss = {float(net.v_ss)!r}\n")
        f.write(f"clamp_r = {float(net.clamp_r)!r}\n")
        for t in net.taps:
            f.write(f"tap node={int(t.node)} source={t.source_name()} "
                    f"g={float(t.conductance)!r}\n")


def load_network(path) -> CouplingNetwork:
    """Read a network file produced by :func:`save_network`."""
    header: dict[str, float] = {}
    taps: list[Tap] = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("tap "):
                fields = dict(kv.split("=", 1) for kv in line[4:].split())
                src = fields["source"]
                if ":" in src:
                    name, ref_s = src.split(":", 1)
                    ref = int(ref_s)
                else:
                    name, ref = src, -1
                taps.append(Tap(int(fields["node"]), _KIND_CODES[name], ref,
                                float(fields["g"])))
            else:
                key, val = (s.strip() for s in line.split("=", 1))
                header[key] = float(val)
    return CouplingNetwork(n=int(header["nodes"]), taps=tuple(taps),
                           clamp_r=header["clamp_r"],
                           v_dd=header["vdd"], v_ss=header["vss"])
