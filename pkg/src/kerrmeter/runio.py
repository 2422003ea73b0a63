"""Output formats and reproducibility manifests.

Every CSV cell is written with 17 significant digits ('.'-decimal,
comma-separated, header row), which round-trips IEEE doubles exactly, so
byte-comparing two CSVs is equivalent to comparing the runs.  Every run
directory gets exactly one ``manifest.json`` holding the fully resolved
configuration, the seeds, and an invariant summary; replaying a manifest
re-executes the run and must reproduce every CSV byte for byte at the
same worker count.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

ARTIFACT_VERSION = "0.1.0"


def float17(x: float) -> str:
    """17-significant-digit decimal text; exact round trip for float64."""
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    """Write named columns; every value formatted via :func:`float17`.

    String-valued columns (outcome labels) pass through unformatted.
    """
    if len(header) != len(columns):
        raise ValueError("header and column count differ")
    n_rows = len(columns[0])
    for col in columns:
        if len(col) != n_rows:
            raise ValueError("ragged columns")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n_rows):
            cells = []
            for col in columns:
                v = col[i]
                cells.append(v if isinstance(v, str) else float17(v))
            fh.write(",".join(cells) + "\n")


def read_csv_columns(path: Path) -> dict[str, list[str]]:
    """Header-keyed raw text columns (no float parsing; byte-faithful)."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    cols: dict[str, list[str]] = {h: [] for h in header}
    for line in lines[1:]:
        for h, cell in zip(header, line.split(",")):
            cols[h].append(cell)
    return cols


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


@dataclass
class RunManifest:
    """Complete provenance record for one CLI run.

    ``resolved_config`` is the fully merged configuration the run used
    (profile defaults, config file, flag overrides), so replaying needs
    nothing but this file.  ``invariants`` summarizes the worst
    deviations observed (max trace deviation, min eigenvalue, leak peak,
    and similar).  Wall time is informational and excluded from the
    digest.
    """

    command: str
    resolved_config: dict
    seeds: dict
    workers: int
    invariants: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0
    artifact_version: str = ARTIFACT_VERSION
    digest: str = ""

    def finalize(self) -> "RunManifest":
        self.digest = config_digest(self.resolved_config)
        return self

    def save(self, out_dir: Path) -> Path:
        path = Path(out_dir) / "manifest.json"
        write_json(path, asdict(self))
        return path

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"manifest has unknown fields: {sorted(extra)}")
        return cls(**data)


def prepare_out_dir(out_dir: Path) -> Path:
    """Create the output directory; refuse to mix runs.

    A directory that already contains a manifest belongs to a previous
    run; writing a second run into it would break the one-manifest-per-
    directory contract, so that is an error rather than an overwrite.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if (out / "manifest.json").exists():
        raise ConfigError(
            f"{out} already contains a manifest; use a fresh --out-dir"
        )
    return out
