"""Run manifests: everything needed to reproduce an invocation bit for bit."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class RunManifest:
    """Record of one experiment invocation.

    The stored configuration is the fully resolved dictionary (defaults,
    file, and flag overrides already merged), so loading it back and
    re-dispatching the experiment reproduces identical outputs.
    """

    experiment: str
    config: dict
    seed: int
    version: str
    outputs: list[str] = field(default_factory=list)
    wall_seconds: float = 0.0
    results: dict = field(default_factory=dict)

    def write(self, path) -> None:
        doc = {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "outputs": self.outputs,
            "wall_seconds": self.wall_seconds,
            "results": self.results,
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as f:
            doc = json.load(f)
        return cls(experiment=doc["experiment"], config=doc["config"],
                   seed=doc["seed"], version=doc["version"],
                   outputs=doc.get("outputs", []),
                   wall_seconds=doc.get("wall_seconds", 0.0),
                   results=doc.get("results", {}))


class Stopwatch:
    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self._t0


def rerun_manifest(manifest_path, out_dir) -> "RunManifest":
    """Re-execute the experiment recorded in a manifest into ``out_dir``."""
    from .cli import dispatch_experiment
    from .config import AppConfig

    man = RunManifest.read(manifest_path)
    cfg = AppConfig(man.config)
    cfg.validate()
    return dispatch_experiment(man.experiment, cfg, Path(out_dir))
