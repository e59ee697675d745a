"""Simulator for MTJ-based probabilistic bits and invertible logic circuits.

Two levels of fidelity live side by side: a device-level engine (telegraph
MTJ, sense branch, low-pass filter, comparator, resistive coupling network)
and an idealized binary stochastic network whose exact Boltzmann distribution
is enumerable and serves as the verification oracle.
"""

from .mtj import MtjParams, MtjState, resistance, effective_barrier, mean_dwell, step, calibrate_bias
from .analog import (PBlockConfig, SourceTap, branch_current, sense_voltage,
                     rc_filter_step, threshold_from_input, comparator, millman_node,
                     design_input_divider)
from .histogram import StateHistogram, tv_distance, code_str, code_index
from .ising import IsingSpec, Clamp, local_field, pbit_update, gibbs_sample, boltzmann_oracle, energy
from .synthesis import (Tap, CouplingNetwork, AND_LEGAL_SET, and_gate_spec,
                        verify_degenerate_ground, ising_to_network, network_to_ising,
                        save_network, load_network)
from .engine import (SimConfig, Waveform, ClampSchedule, Trace, InvariantViolation,
                     run_pblock, run_pcircuit, run_pblock_histogram, operating_point,
                     substream, DRIVE0, DRIVE1, FLOAT)

__version__ = "0.1.0"

from .config import AppConfig, ConfigError
from .experiments import (transfer_curve, vmtj_histogram, step_response, ramp_test,
                          clamp_experiment, stabilization, oracle_report, calibrate_beta)
from .manifest import RunManifest, rerun_manifest
