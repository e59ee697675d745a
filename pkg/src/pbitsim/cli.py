"""Command-line harness.

Subcommands run one named experiment each, write CSV tables plus a manifest
into the output directory, and print a short summary.  Exit codes: 0 on
success, 2 on configuration errors, 3 when a run-time invariant fails
(including a failed `verify`).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import AppConfig, ConfigError, BLOCK_NAMES
from .engine import InvariantViolation, SimConfig
from .experiments import (clamp_experiment, oracle_report, ramp_test,
                          stabilization, step_response, transfer_curve,
                          vmtj_histogram)
from .histogram import StateHistogram, code_str
from .ising import Clamp
from .manifest import RunManifest, Stopwatch
from .stats import fit_tanh, interior_mode_count, logistic_steepness, rail_bin_mass
from .synthesis import (AND_LEGAL_SET, network_to_ising, save_network,
                        verify_degenerate_ground)

_F = "%.10g"


def _fmt(x) -> str:
    return _F % float(x)


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")


def _legal_set(cfg: AppConfig):
    if cfg.raw.get("gate", {}).get("name", "and") == "and":
        return AND_LEGAL_SET
    # custom coupling spec: the gate's legal codes are its ground states
    from .ising import energy
    from .histogram import index_to_spins
    spec = cfg.ising_spec()
    energies = np.array([energy(index_to_spins(i, spec.n), spec) for i in range(2 ** spec.n)])
    return frozenset(code_str(i, spec.n) for i in np.flatnonzero(energies <= energies.min() + 1e-9))


def _clamps_from_config(cfg: AppConfig) -> tuple[Clamp, ...]:
    raw = cfg.experiment("gate").get("clamps", {})
    mapping = {"0": Clamp.ZERO, "1": Clamp.ONE, "n": Clamp.FREE, 0: Clamp.ZERO, 1: Clamp.ONE}
    out = []
    for name in BLOCK_NAMES:
        val = raw.get(name, "n")
        if val not in mapping:
            raise ConfigError(f"clamp {name}={val!r} not one of 0, 1, n")
        out.append(mapping[val])
    return tuple(out)


def _hist_rows(hist: StateHistogram):
    counts = np.rint(hist.freqs * hist.n_samples).astype(int)
    for i, code in enumerate(hist.codes()):
        legal = "" if hist.legal is None else ("Y" if hist.legal[i] else "N")
        yield code, counts[i], _fmt(hist.freqs[i]), legal


# ---------------------------------------------------------------------------
# experiment runners


def _run_transfer(cfg: AppConfig, out: Path) -> dict:
    exp = cfg.experiment("transfer")
    sim = SimConfig(duration=float(exp["duration"]),
                    dt=float(exp.get("dt", cfg.dt)),
                    sample_period=cfg.sample_period, seed=cfg.seed)
    grid = np.linspace(float(exp["v_min"]), float(exp["v_max"]), int(exp["points"]))
    t_c_list = [float(t) for t in exp["t_c_list"]]
    curve = transfer_curve(cfg.pblock(), cfg.mtj(), t_c_list, grid, sim,
                           shared_noise=bool(exp.get("shared_noise", True)))
    _write_csv(out / "transfer.csv", "t_c_s,v_in_v,mean_logic_out",
               ((_fmt(tc), _fmt(v), _fmt(m)) for tc, v, m in curve.rows()))
    results = {}
    for i, tc in enumerate(t_c_list):
        y = curve.mean_out[i]
        fit = fit_tanh(grid, y)
        results[f"steepness_per_v[{_fmt(tc)}]"] = logistic_steepness(grid, y)
        results[f"tanh_r2[{_fmt(tc)}]"] = fit.r_squared
        results[f"monotone[{_fmt(tc)}]"] = bool(np.all(np.diff(y) <= 1e-12))
    results["steepness_ratio"] = (results[f"steepness_per_v[{_fmt(t_c_list[0])}]"]
                                  / results[f"steepness_per_v[{_fmt(t_c_list[-1])}]"])
    return {"files": ["transfer.csv"], "results": results}


def _run_vmtj(cfg: AppConfig, out: Path) -> dict:
    exp = cfg.experiment("vmtj")
    sim = SimConfig(duration=float(exp["duration"]),
                    dt=float(exp.get("dt", cfg.dt)),
                    sample_period=cfg.sample_period, seed=cfg.seed)
    t_c_list = [float(t) for t in exp["t_c_list"]]
    hists = vmtj_histogram(cfg.pblock(), cfg.mtj(), t_c_list, sim,
                           n_bins=int(exp.get("bins", 64)))
    rows = []
    freqs = hists.frequencies()
    for i, tc in enumerate(t_c_list):
        for b in range(freqs.shape[1]):
            rows.append((_fmt(tc), _fmt(hists.edges[b]), _fmt(hists.edges[b + 1]),
                         _fmt(freqs[i, b])))
    _write_csv(out / "vmtj_hist.csv", "t_c_s,bin_lo_v,bin_hi_v,frequency", rows)
    results = {}
    for i, tc in enumerate(t_c_list):
        modes, interior = interior_mode_count(hists.counts[i])
        results[f"rail_mass[{_fmt(tc)}]"] = rail_bin_mass(hists.counts[i])
        results[f"modes[{_fmt(tc)}]"] = modes
        results[f"modal_bin_interior[{_fmt(tc)}]"] = interior
    return {"files": ["vmtj_hist.csv"], "results": results}


def _run_step(cfg: AppConfig, out: Path) -> dict:
    exp = cfg.experiment("step")
    sim = SimConfig(duration=float(exp["duration"]),
                    dt=float(exp.get("dt", cfg.dt)),
                    sample_period=float(exp.get("dt", cfg.dt)), seed=cfg.seed)
    block = cfg.pblock(t_c=float(exp["t_c"])) if "t_c" in exp else cfg.pblock()
    resp = step_response(block, cfg.mtj(), sim,
                         v_before=float(exp["v_before"]), v_after=float(exp["v_after"]),
                         t_step=float(exp["t_step"]), n_captures=int(exp["captures"]))
    _write_csv(out / "step_latency.csv", "capture,latency_s,censored",
               ((c, "" if np.isnan(lat) else _fmt(lat), int(cen))
                for c, (lat, cen) in enumerate(zip(resp.latencies, resp.censored))))
    rows = []
    for c in range(resp.overlay_vout.shape[0]):
        for t, v in zip(resp.overlay_times, resp.overlay_vout[c]):
            rows.append((c, _fmt(t), _fmt(v)))
    _write_csv(out / "step_overlay.csv", "capture,time_rel_s,v_out", rows)
    results = {
        "n_responding": resp.n_responding,
        "n_censored": int(resp.censored.sum()),
        "latency_min_s": resp.quantile(0.0),
        "latency_median_s": resp.quantile(0.5),
        "latency_p95_s": resp.quantile(0.95),
    }
    return {"files": ["step_latency.csv", "step_overlay.csv"], "results": results}


def _run_ramp(cfg: AppConfig, out: Path) -> dict:
    exp = cfg.experiment("ramp")
    sim = SimConfig(duration=float(exp["duration"]),
                    dt=float(exp.get("dt", cfg.dt)),
                    sample_period=float(exp.get("sample_period", cfg.sample_period)),
                    seed=cfg.seed)
    result = ramp_test(cfg.blocks(), sim, v0=float(exp["v0"]), v1=float(exp["v1"]),
                       window=float(exp["window"]))
    rows = []
    for b in range(result.window_means.shape[0]):
        for t, m in zip(result.window_centers, result.window_means[b]):
            rows.append((BLOCK_NAMES[b], _fmt(t), _fmt(m)))
    _write_csv(out / "ramp_windows.csv", "blk,window_center_s,mean_logic", rows)
    results = {}
    for b, name in enumerate(BLOCK_NAMES):
        results[f"start_mean[{name}]"] = float(result.window_means[b, 0])
        results[f"end_mean[{name}]"] = float(result.window_means[b, -1])
    results["v_out_values"] = [float(v) for v in result.v_out_values]
    return {"files": ["ramp_windows.csv"], "results": results}


def _run_gate(cfg: AppConfig, out: Path) -> dict:
    exp = cfg.experiment("gate")
    sim = SimConfig(duration=float(exp["duration"]),
                    dt=float(exp.get("dt", cfg.dt)),
                    sample_period=float(exp.get("sample_period", cfg.sample_period)),
                    seed=cfg.seed)
    clamps = _clamps_from_config(cfg)
    legal = _legal_set(cfg)
    net = cfg.network()
    hist, trace = clamp_experiment(cfg.blocks(), net, clamps, sim, legal_set=legal)
    trace.write_csv(out / "gate_trace.csv")
    _write_csv(out / "gate_hist.csv", "code,count,frequency,legal", _hist_rows(hist))
    save_network(net, out / "gate_network.txt")
    report = oracle_report(cfg.ising_spec(), clamps, hist, legal_set=legal)
    _write_csv(out / "gate_oracle.csv", "code,probability,legal,freq_minus_prob",
               ((code, _fmt(p), "Y" if lg else "N", _fmt(d))
                for code, p, lg, d in zip(report.codes(), report.probs,
                                          report.legal, report.per_code_delta)))
    results = {
        "clamps": {n: c.name for n, c in zip(BLOCK_NAMES, clamps)},
        "tv_vs_oracle": report.tv,
        "modal_codes": sorted(hist.modal_codes()),
        "oracle_modal_codes": sorted(report.modal_codes()),
        "marginals": {n: hist.marginal(i) for i, n in enumerate(BLOCK_NAMES)},
        "n_samples": hist.n_samples,
    }
    return {"files": ["gate_trace.csv", "gate_hist.csv", "gate_network.txt",
                      "gate_oracle.csv"], "results": results}


def _run_stabilize(cfg: AppConfig, out: Path) -> dict:
    exp = cfg.experiment("stabilize")
    sim = SimConfig(duration=float(exp["duration"]),
                    dt=float(exp.get("dt", cfg.dt)),
                    sample_period=float(exp.get("sample_period", cfg.sample_period)),
                    seed=cfg.seed)
    legal = _legal_set(cfg)
    result = stabilization(cfg.blocks(), cfg.network(), sim,
                           t_flip=float(exp["t_flip"]),
                           window_list=[float(w) for w in exp["windows"]],
                           n_trials=int(exp["trials"]),
                           suppression_threshold=cfg.margin("suppression_threshold"),
                           suppression_window=float(exp["suppression_window"]),
                           legal_set=legal)
    rows = []
    for w, hist in zip(result.window_seconds, result.window_hists):
        for code, cnt, freq, lg in _hist_rows(hist):
            rows.append((_fmt(w), code, cnt, freq, lg))
    _write_csv(out / "stabilize_windows.csv", "window_s,code,count,frequency,legal", rows)
    _write_csv(out / "stabilize_summary.csv", "window_s,tv_to_stationary",
               ((_fmt(w), _fmt(tv)) for w, tv in
                zip(result.window_seconds, result.tv_to_stationary)))
    _write_csv(out / "stabilize_stationary.csv", "code,count,frequency,legal",
               _hist_rows(result.stationary))
    results = {
        "suppression_onset_s": result.suppression_onset,
        "n_trials": result.n_trials,
        "tv_at_window": {_fmt(w): float(tv) for w, tv in
                         zip(result.window_seconds, result.tv_to_stationary)},
    }
    return {"files": ["stabilize_windows.csv", "stabilize_summary.csv",
                      "stabilize_stationary.csv"], "results": results}


def _run_oracle(cfg: AppConfig, out: Path) -> dict:
    clamps = _clamps_from_config(cfg)
    report = oracle_report(cfg.ising_spec(), clamps, legal_set=_legal_set(cfg))
    _write_csv(out / "oracle.csv", "code,probability,legal",
               ((code, _fmt(p), "Y" if lg else "N")
                for code, p, lg in zip(report.codes(), report.probs, report.legal)))
    return {"files": ["oracle.csv"],
            "results": {"clamps": {n: c.name for n, c in zip(BLOCK_NAMES, clamps)},
                        "modal_codes": sorted(report.modal_codes())}}


def _run_verify(cfg: AppConfig, out: Path) -> dict:
    spec = cfg.ising_spec()
    legal = _legal_set(cfg)
    check = verify_degenerate_ground(spec, legal)
    gate = cfg.raw.get("gate", {})
    r_unit = float(gate.get("r_unit", 1e4))
    recovered = network_to_ising(cfg.network(), r_unit)
    rt_ok = (np.allclose(recovered.J, spec.J, rtol=1e-12, atol=1e-15)
             and np.allclose(recovered.h, spec.h, rtol=1e-12, atol=1e-15))
    _write_csv(out / "verify_energies.csv", "code,energy,legal",
               ((c, _fmt(e), "Y" if lg else "N")
                for c, e, lg in zip(check.codes, check.energies, check.legal)))
    results = {
        "degenerate_ground": check.passed,
        "gap": check.gap,
        "roundtrip_exact": bool(rt_ok),
        "passed": bool(check.passed and rt_ok),
    }
    return {"files": ["verify_energies.csv"], "results": results}


_RUNNERS = {
    "transfer": _run_transfer,
    "vmtj-hist": _run_vmtj,
    "step": _run_step,
    "ramp": _run_ramp,
    "gate": _run_gate,
    "stabilize": _run_stabilize,
    "oracle": _run_oracle,
    "verify": _run_verify,
}


def dispatch_experiment(name: str, cfg: AppConfig, out_dir: Path) -> RunManifest:
    """Run one experiment and write its outputs plus a manifest."""
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with Stopwatch() as sw:
        payload = _RUNNERS[name](cfg, out_dir)
    man = RunManifest(experiment=name, config=cfg.raw, seed=cfg.seed,
                      version=__version__, outputs=payload["files"],
                      wall_seconds=sw.elapsed, results=payload["results"])
    man.write(out_dir / "manifest.json")
    return man


def _parse_clamp_flags(values: list[str]) -> dict:
    out = {}
    for item in values:
        if "=" not in item:
            raise ConfigError(f"--clamp expects NAME=0|1|n, got {item!r}")
        name, val = item.split("=", 1)
        name = name.strip().upper()
        if name not in BLOCK_NAMES or val not in ("0", "1", "n"):
            raise ConfigError(f"--clamp expects A|B|C = 0|1|n, got {item!r}")
        out[name] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="FILE", default=argparse.SUPPRESS,
                        help="YAML config overriding the defaults")
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    shared.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help="output directory (default pbitsim-out)")
    shared.add_argument("--duration", type=float, default=argparse.SUPPRESS,
                        help="override the experiment duration (s)")
    shared.add_argument("--dt", type=float, default=argparse.SUPPRESS,
                        help="override the timestep (s)")

    p = argparse.ArgumentParser(
        prog="pbitsim", parents=[shared],
        description="Simulate stochastic-MTJ probabilistic bits and an invertible AND circuit.")
    p.add_argument("--version", action="version", version=f"pbitsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("transfer", "mean output versus input for several filter constants"),
            ("vmtj-hist", "distribution of the filtered sense signal"),
            ("step", "output latency after an input step, many captures"),
            ("ramp", "all blocks driven by one ramp, network disconnected"),
            ("gate", "clamped-gate code histogram against the exact distribution"),
            ("stabilize", "histogram formation after the output clamp releases"),
            ("oracle", "exact code distribution for a clamp assignment"),
            ("verify", "gate energy audit and network round-trip check")]:
        sp = sub.add_parser(name, help=helptext, parents=[shared])
        if name in ("gate", "oracle"):
            sp.add_argument("--clamp", action="append", default=[], metavar="NAME=0|1|n",
                            help="clamp assignment, repeatable (default: all floating)")
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    args = argparse.Namespace(config=None, seed=None, out="pbitsim-out",
                              duration=None, dt=None, clamp=[])
    args.__dict__.update(ns.__dict__)
    try:
        overrides: dict = {"sim": {}, "experiments": {args.command: {}}}
        if args.seed is not None:
            overrides["sim"]["seed"] = args.seed
        if args.dt is not None:
            overrides["sim"]["dt"] = args.dt
            overrides["experiments"][args.command]["dt"] = args.dt
        if args.duration is not None:
            overrides["experiments"][args.command]["duration"] = args.duration
        if getattr(args, "clamp", None):
            overrides["experiments"].setdefault("gate", {})["clamps"] = \
                _parse_clamp_flags(args.clamp)
        cfg = AppConfig.load(args.config, overrides)
        man = dispatch_experiment(args.command, cfg, Path(args.out))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 3
    for key, val in man.results.items():
        print(f"{key}: {val}")
    print(f"outputs in {args.out}: {', '.join(man.outputs)} (+ manifest.json)")
    if args.command == "verify" and not man.results.get("passed", False):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
