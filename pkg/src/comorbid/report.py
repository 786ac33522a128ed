"""Plot-ready exports and run manifests.

The manifest is split into two files: `manifest.json` holds everything
deterministic (config snapshot, input digests, seeds, versions) and
`timings.json` holds wall-clock step durations, so two runs with the same
inputs produce byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import FormatError, ValidationError
from .graphs import BoxplotSummary, boxplot_summary
from .matrix import InterconnectionMatrix, save_matrix
from .transforms import clip_at_quantile, minmax_scale

__all__ = [
    "BoxplotSummary",
    "boxplot_summary",
    "heatmap_export",
    "RunManifest",
    "file_digest",
    "save_manifest",
    "load_manifest",
    "verify_manifest",
]

MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"


def heatmap_export(
    matrix: InterconnectionMatrix,
    transforms: Sequence[str],
    path: str | Path,
) -> InterconnectionMatrix:
    """Apply named transforms in order and write the matrix CSV plus a
    transform log. Valid names: `minmax`, `clip(q)` with 0 < q < 1."""
    out = matrix
    applied: list[str] = []
    for name in transforms:
        name = name.strip()
        if name == "minmax":
            out = minmax_scale(out)
        elif name.startswith("clip(") and name.endswith(")"):
            try:
                q = float(name[5:-1])
            except ValueError as exc:
                raise ValidationError(f"invalid transform {name!r}") from exc
            if not 0.0 < q < 1.0:
                raise ValidationError(f"clip quantile must lie in (0, 1), got {q}")
            out = clip_at_quantile(out, q)
        else:
            raise ValidationError(f"unknown transform {name!r}")
        applied.append(name)
    path = Path(path)
    save_matrix(out, path)
    log_path = path.with_suffix(".transforms.json")
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"method_name": matrix.method_name, "transforms": applied},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record for one pipeline run."""

    config: dict
    input_digests: dict[str, str]
    seed: int
    tool_version: str
    steps: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def record(self, step: str, seconds: float) -> None:
        self.steps.append(step)
        self.timings[step] = seconds


def save_manifest(manifest: RunManifest, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stable = {
        "config": manifest.config,
        "input_digests": manifest.input_digests,
        "seed": manifest.seed,
        "tool_version": manifest.tool_version,
        "steps": manifest.steps,
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(stable, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / TIMINGS_NAME, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"timings_seconds": manifest.timings}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")


def load_manifest(out_dir: str | Path) -> RunManifest:
    out_dir = Path(out_dir)
    with open(out_dir / MANIFEST_NAME, encoding="utf-8") as fh:
        stable = json.load(fh)
    for key in ("config", "input_digests", "seed", "tool_version", "steps"):
        if key not in stable:
            raise FormatError(f"{MANIFEST_NAME}: missing `{key}`")
    timings: dict[str, float] = {}
    timings_path = out_dir / TIMINGS_NAME
    if timings_path.exists():
        with open(timings_path, encoding="utf-8") as fh:
            timings = json.load(fh).get("timings_seconds", {})
    return RunManifest(
        config=stable["config"],
        input_digests=stable["input_digests"],
        seed=stable["seed"],
        tool_version=stable["tool_version"],
        steps=list(stable["steps"]),
        timings=timings,
    )


def verify_manifest(manifest: RunManifest) -> list[str]:
    """Recompute input digests; return the paths that changed or vanished."""
    mismatches = []
    for path, digest in sorted(manifest.input_digests.items()):
        try:
            if file_digest(path) != digest:
                mismatches.append(path)
        except OSError:
            mismatches.append(path)
    return mismatches
