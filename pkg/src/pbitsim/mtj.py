"""Two-state telegraph model of a thermally stable in-plane MTJ.

The junction is a continuous-time Markov process over the parallel (P) and
anti-parallel (AP) magnetic states.  Dwell times follow the Arrhenius law
tau = tau0 * exp(delta), where the energy barrier seen from each state is
lowered independently by its own drive: bias current destabilizes P through
spin-transfer torque, a static field destabilizes AP.  Tuning both drives
sets the two mean dwell times individually, which is what lets several
junctions with device-to-device variation be operated at a common rate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class MtjState(enum.IntEnum):
    """Magnetic configuration of the free layer. P has the lower resistance."""

    AP = 0
    P = 1


@dataclass(frozen=True)
class MtjParams:
    """Device constants for one junction.

    Barriers are zero-bias thermal stability factors (units of kT).  ``i_c``
    is the current that fully collapses the P barrier, ``h_k`` the field that
    fully collapses the AP barrier.  ``bias_field`` is the static applied
    field the device sits in (the magnet fixture travels with the device, so
    it is carried here rather than threaded through every call).
    """

    r_p: float = 1000.0          # ohm
    r_ap: float = 2000.0         # ohm
    delta0_p: float = 40.0       # kT units
    delta0_ap: float = 40.0      # kT units
    tau0: float = 1e-9           # s
    i_c: float = 4e-4            # A
    h_k: float = 0.012           # T
    h_coercive: float = 0.010    # T
    bias_field: float = 0.012 * (1.0 - math.log(1e3) / 40.0)  # T, ~1 us AP dwell

    def __post_init__(self):
        if not self.r_ap > self.r_p > 0:
            raise ValueError(f"need r_ap > r_p > 0, got r_p={self.r_p}, r_ap={self.r_ap}")
        if self.delta0_p <= 0 or self.delta0_ap <= 0:
            raise ValueError("zero-bias barriers must be positive")
        if self.tau0 <= 0:
            raise ValueError("attempt time must be positive")
        if self.i_c <= 0:
            raise ValueError("critical current must be positive")
        if self.h_k <= 0:
            raise ValueError("barrier-collapse field must be positive")
        if self.bias_field < 0:
            raise ValueError("bias field must be non-negative")


def resistance(state: MtjState, params: MtjParams) -> float:
    """Junction resistance in the given state."""
    return params.r_p if state == MtjState.P else params.r_ap


def effective_barrier(state: MtjState, current: float, field: float, params: MtjParams) -> float:
    """Bias-dependent energy barrier (kT units) for leaving ``state``.

    First-order linear lowering, clamped at zero: current only acts on P
    (spin-transfer torque), field only acts on AP.
    """
    if current < 0:
        raise ValueError("current must be non-negative")
    if field < 0:
        raise ValueError("field must be non-negative")
    if state == MtjState.P:
        return params.delta0_p * max(0.0, 1.0 - current / params.i_c)
    return params.delta0_ap * max(0.0, 1.0 - field / params.h_k)


def mean_dwell(barrier: float, tau0: float) -> float:
    """Arrhenius mean dwell time tau0 * exp(barrier)."""
    if barrier < 0:
        raise ValueError("barrier must be non-negative")
    return tau0 * math.exp(barrier)


def flip_probability(dt: float, tau: float) -> float:
    """Exact per-step escape probability 1 - exp(-dt/tau)."""
    if dt <= 0 or tau <= 0:
        raise ValueError("dt and tau must be positive")
    return -math.expm1(-dt / tau)


def step(state: MtjState, dt: float, tau_current_state: float, rng: np.random.Generator) -> MtjState:
    """Advance one timestep; flips with probability 1 - exp(-dt/tau).

    Consumes exactly one uniform draw per call, flipped or not.
    """
    p = flip_probability(dt, tau_current_state)
    u = rng.random()
    if u < p:
        return MtjState.AP if state == MtjState.P else MtjState.P
    return state


def sample_dwells(tau: float, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` dwell durations (seconds) under the stepped dynamics.

    The number of steps spent in a state before escaping is geometric with
    the per-step flip probability, which is exactly the law produced by
    repeated :func:`step` calls; sampling it directly avoids the step loop.
    """
    p = flip_probability(dt, tau)
    return rng.geometric(p, size=n) * dt


def calibrate_bias(params: MtjParams, r_series: float, tau_p: float, tau_ap: float) -> tuple[float, float]:
    """Solve the drive (v_block, field) hitting target mean dwells.

    ``r_series`` is the total series resistance in the P state (sense
    resistor plus r_p), so the returned source voltage produces the P-state
    branch current that sets the P barrier.  Targets must be reachable,
    i.e. above tau0 and below the zero-bias dwell.
    """
    for name, tau, delta0 in (("tau_p", tau_p, params.delta0_p), ("tau_ap", tau_ap, params.delta0_ap)):
        barrier = math.log(tau / params.tau0)
        if not 0.0 <= barrier <= delta0:
            raise ValueError(f"{name}={tau} not reachable: needs barrier {barrier:.2f} in [0, {delta0}]")
    current = params.i_c * (1.0 - math.log(tau_p / params.tau0) / params.delta0_p)
    field = params.h_k * (1.0 - math.log(tau_ap / params.tau0) / params.delta0_ap)
    return current * r_series, field
