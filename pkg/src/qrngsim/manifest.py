"""Run manifests: enough metadata to replay any command bit for bit.

A manifest records the command name, every parameter that influences the
output, the seed, tool version, wall-clock start/end stamps, and a SHA-256
digest per output file.  Replaying the stored parameters with the same
tool version must reproduce every digest; the timestamps are documentation
and take no part in that contract.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import __version__


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int
    tool_version: str = __version__
    started_utc: str = ""
    finished_utc: str = ""
    outputs: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_output(self, name: str, path) -> None:
        self.outputs.append({"name": name, "sha256": sha256_file(path)})

    def as_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "seed": self.seed,
            "parameters": self.parameters,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "outputs": self.outputs,
            "metadata": self.metadata,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path, "r", encoding="ascii") as fh:
            raw = json.load(fh)
        return cls(
            command=raw["command"],
            parameters=raw["parameters"],
            seed=raw["seed"],
            tool_version=raw["tool_version"],
            started_utc=raw.get("started_utc", ""),
            finished_utc=raw.get("finished_utc", ""),
            outputs=raw.get("outputs", []),
            metadata=raw.get("metadata", {}),
        )
