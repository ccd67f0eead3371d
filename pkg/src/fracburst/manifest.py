"""Run manifests: resolved configuration, input and output hashes, seeds."""
from __future__ import annotations

import datetime as _dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

from . import __version__
from .config import tomllib
from .errors import ConfigError

__all__ = ["RunManifest", "sha256_file", "MANIFEST_NAME"]

MANIFEST_NAME = "manifest.toml"
_INT64_MAX = 2**63 - 1


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _encode(value):
    # TOML integers are signed 64-bit
    if isinstance(value, int) and not isinstance(value, bool) and value > _INT64_MAX:
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _table(d: dict) -> dict:
    # TOML has no null: absent keys mean "not set"
    return {k: _encode(v) for k, v in d.items() if v is not None}


def _decode_seed(value):
    return int(value) if isinstance(value, str) and value.isdigit() else value


@dataclass
class RunManifest:
    """Provenance record written next to every run's outputs.

    ``outputs`` maps file names (relative to the run directory) to SHA-256
    digests; ``inputs`` does the same for files the run read.
    """

    command: str
    config: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, rundir, name: str) -> None:
        self.outputs[name] = sha256_file(Path(rundir) / name)

    def to_toml(self) -> str:
        doc = {
            "run": {"tool": "fracburst", "version": self.version, "timestamp": self.timestamp, "command": self.command},
            "config": _table(self.config),
            "seeds": _table(self.seeds),
            "inputs": dict(self.inputs),
            "outputs": dict(self.outputs),
        }
        if self.extra:
            doc["extra"] = _table(self.extra)
        return tomli_w.dumps(doc)

    def write(self, rundir) -> Path:
        path = Path(rundir) / MANIFEST_NAME
        path.write_text(self.to_toml())
        return path

    @classmethod
    def from_toml(cls, text: str, source: str = "<manifest>") -> "RunManifest":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        run = doc.get("run")
        if not isinstance(run, dict) or "command" not in run or "config" not in doc:
            raise ConfigError(f"{source}: not a fracburst manifest")
        config = {k: _decode_seed(v) if k == "seed" else v for k, v in doc["config"].items()}
        return cls(
            command=run["command"],
            config=config,
            seeds={k: _decode_seed(v) for k, v in doc.get("seeds", {}).items()},
            inputs=dict(doc.get("inputs", {})),
            outputs=dict(doc.get("outputs", {})),
            extra=dict(doc.get("extra", {})),
            version=run.get("version", ""),
            timestamp=run.get("timestamp", ""),
        )

    @classmethod
    def read(cls, path) -> "RunManifest":
        p = Path(path)
        if p.is_dir():
            p = p / MANIFEST_NAME
        return cls.from_toml(p.read_text(), str(p))

