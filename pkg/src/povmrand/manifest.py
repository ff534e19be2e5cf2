"""Run manifests: every output file is paired with a reproducibility record."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Record of one CLI run: config echo, seed, digests, outputs, timing."""

    subcommand: str
    config: dict
    seed: int | None
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: dict = field(default_factory=dict)  # path -> sha256
    version: str = __version__
    wall_clock_s: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path) -> Path:
        self.wall_clock_s = time.perf_counter() - self._started
        path = Path(path)
        payload = {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def manifest_path_for(output_path) -> Path:
    """Manifest paired with an output file: <file>.manifest.json."""
    p = Path(output_path)
    return p.with_name(p.name + ".manifest.json")
