"""Configuration loading and resolution.

A single YAML file (key/value with nested sections) drives everything; the
copy shipped with the package documents every default.  User files and CLI
flags override it key by key.  Resolution errors raise ConfigError, which the
CLI maps to exit code 2.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .analog import PBlockConfig
from .ising import IsingSpec
from .mtj import MtjParams
from .synthesis import CouplingNetwork, and_gate_spec, ising_to_network

BLOCK_NAMES = ("A", "B", "C")


class ConfigError(ValueError):
    """The configuration failed validation."""


def default_config_text() -> str:
    return resources.files("pbitsim").joinpath("default-config.yaml").read_text()


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class AppConfig:
    """Fully resolved run configuration plus the raw dictionary behind it."""

    raw: dict

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "AppConfig":
        try:
            raw = yaml.safe_load(default_config_text())
            if path is not None:
                with open(path) as f:
                    user = yaml.safe_load(f)
                if user is None:
                    user = {}
                if not isinstance(user, dict):
                    raise ConfigError(f"config file {path} must be a mapping")
                raw = _deep_merge(raw, user)
            if overrides:
                raw = _deep_merge(raw, overrides)
        except (yaml.YAMLError, OSError) as e:
            raise ConfigError(str(e)) from e
        cfg = cls(raw)
        cfg.validate()
        return cfg

    # -- resolved objects ---------------------------------------------------

    def mtj(self, block: str | None = None) -> MtjParams:
        sect = dict(self.raw["mtj"])
        sect.update(self._block_override(block).get("mtj", {}))
        try:
            return MtjParams(**sect)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"mtj section: {e}") from e

    def pblock(self, block: str | None = None, **replace) -> PBlockConfig:
        sect = dict(self.raw["pblock"])
        ov = self._block_override(block)
        sect.update({k: v for k, v in ov.items() if k != "mtj"})
        sect.update(replace)
        try:
            return PBlockConfig(**sect)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"pblock section: {e}") from e

    def _block_override(self, block: str | None) -> dict:
        if block is None:
            return {}
        return self.raw.get("blocks") and self.raw["blocks"].get(block, {}) or {}

    def blocks(self, t_c: float | None = None) -> list[tuple[PBlockConfig, MtjParams]]:
        out = []
        for name in BLOCK_NAMES:
            replace = {} if t_c is None else {"t_c": t_c}
            out.append((self.pblock(name, **replace), self.mtj(name)))
        return out

    def ising_spec(self) -> IsingSpec:
        gate = self.raw.get("gate", {})
        name = gate.get("name", "and")
        if name == "and":
            spec_raw = self.raw.get("ising") or {}
            return and_gate_spec(i0=float(spec_raw.get("i0", 1.0)),
                                 beta=float(spec_raw.get("beta", 1.0)))
        if name == "ising":
            spec_raw = self.raw.get("ising")
            if not spec_raw:
                raise ConfigError("gate.name is 'ising' but no ising section given")
            try:
                return IsingSpec(np.array(spec_raw["J"], dtype=float),
                                 np.array(spec_raw["h"], dtype=float),
                                 i0=float(spec_raw.get("i0", 1.0)),
                                 beta=float(spec_raw.get("beta", 1.0)))
            except (KeyError, ValueError) as e:
                raise ConfigError(f"ising section: {e}") from e
        raise ConfigError(f"unknown gate name {name!r}")

    def network(self) -> CouplingNetwork:
        gate = self.raw.get("gate", {})
        pb = self.pblock()
        try:
            return ising_to_network(self.ising_spec(),
                                    r_unit=float(gate.get("r_unit", 1e4)),
                                    clamp_r=float(gate["clamp_r"]) if "clamp_r" in gate else None,
                                    v_dd=pb.v_dd, v_ss=pb.v_ss,
                                    equalize=bool(gate.get("equalize", True)))
        except ValueError as e:
            raise ConfigError(f"gate section: {e}") from e

    def experiment(self, name: str) -> dict:
        return dict(self.raw.get("experiments", {}).get(name, {}))

    def margin(self, name: str) -> float:
        margins = self.raw.get("margins", {})
        if name not in margins:
            raise ConfigError(f"margin {name!r} is not configured")
        return float(margins[name])

    @property
    def seed(self) -> int:
        return int(self.raw["sim"]["seed"])

    @property
    def dt(self) -> float:
        return float(self.raw["sim"]["dt"])

    @property
    def sample_period(self) -> float:
        return float(self.raw["sim"]["sample_period"])

    def validate(self) -> None:
        for sect in ("mtj", "pblock", "sim", "experiments", "margins"):
            if sect not in self.raw:
                raise ConfigError(f"missing config section {sect!r}")
        self.mtj()
        self.pblock()
        self.ising_spec()
        self.network()
        sim = self.raw["sim"]
        for key in ("dt", "sample_period", "seed"):
            if key not in sim:
                raise ConfigError(f"sim section missing {key!r}")
        if float(sim["dt"]) <= 0:
            raise ConfigError("sim.dt must be positive")
        if int(sim["seed"]) < 0:
            raise ConfigError("sim.seed must be non-negative")
