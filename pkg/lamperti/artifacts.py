"""
artifacts.py
============
Writers for every file LampertiLab leaves on disk.

Each artifact starts with the same metadata (tool, version, resolved
config, seed, generator), so rerunning the recorded config reproduces it
byte for byte. CSV and matrix text carry it as `# key: value` lines; JSON
documents carry it under "metadata" next to the "schema" tag.

Usage:
  from lamperti.artifacts import Artifacts
  out = Artifacts("output", cfg.to_dict(), seed=cfg.seed)
  out.table("design", table.to_frame())
"""

import json
import math
import os
from typing import Any, List, Mapping, Optional

import numpy as np
import pandas as pd

from lamperti.config import CSV_FLOAT_FORMAT, GENERATOR_NAME, SCHEMA_VERSION, TOOL_NAME, TOOL_VERSION
from lamperti.errors import ParameterError


def metadata(config: Mapping[str, Any], seed: Optional[int] = None) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "config": plain(dict(config)),
        "seed": seed,
        "generator": GENERATOR_NAME,
    }


def header_lines(meta: Mapping[str, Any]) -> List[str]:
    lines = []
    for key in ("tool", "version", "config", "seed", "generator"):
        value = meta.get(key)
        if key == "config":
            value = json.dumps(value, sort_keys=True, separators=(",", ":"))
        lines.append(f"# {key}: {value}")
    return lines


def plain(value: Any) -> Any:
    """JSON-safe copy: arrays to lists, numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, Mapping):
        return {str(k): plain(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def write_csv(path: str, frame: pd.DataFrame, meta: Mapping[str, Any]) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(header_lines(meta)) + "\n")
        frame.to_csv(fh, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(path: str, document: Mapping[str, Any], meta: Mapping[str, Any]) -> str:
    body = {"schema": SCHEMA_VERSION, "metadata": plain(dict(meta))}
    body.update(plain(dict(document)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    return path


def write_matrix(path: str, matrix: np.ndarray, meta: Mapping[str, Any]) -> str:
    """Row-major text: metadata lines, an `N <n>` line, then one row per line."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(header_lines(meta)) + "\n")
        fh.write(f"N {M.shape[0]}\n")
        np.savetxt(fh, M, fmt=CSV_FLOAT_FORMAT, delimiter=" ")
    return path


def read_matrix(path: str) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    if not lines or not lines[0].startswith("N "):
        raise ParameterError(f"{path} is not a matrix text file")
    N = int(lines[0].split()[1])
    M = np.loadtxt(lines[1:], ndmin=2)
    if M.shape != (N, N):
        raise ParameterError(f"{path} declares N={N} but holds a {M.shape} matrix")
    return M


def read_vector(path: str) -> np.ndarray:
    """Whitespace or newline separated numbers, `#` comments allowed."""
    if not os.path.exists(path):
        raise ParameterError(f"vector file not found: {path}")
    return np.loadtxt(path, comments="#", ndmin=1).ravel()


def scalar_frame(values: Mapping[str, Any]) -> pd.DataFrame:
    return pd.DataFrame({"key": list(values.keys()), "value": [plain(v) for v in values.values()]})


class Artifacts:
    """Output directory bound to one run's metadata and format."""

    def __init__(self, out: str, config: Mapping[str, Any], seed: Optional[int] = None, fmt: str = "csv"):
        self.out = out
        self.meta = metadata(config, seed)
        self.fmt = fmt
        self.saved: List[str] = []
        os.makedirs(out, exist_ok=True)

    def _path(self, name: str, ext: str) -> str:
        return os.path.join(self.out, f"{name}.{ext}")

    def _record(self, path: str) -> str:
        self.saved.append(path)
        print(f"  Saved: {path}")
        return path

    def table(self, name: str, frame: pd.DataFrame) -> str:
        if self.fmt == "json":
            return self._record(write_json(self._path(name, "json"), {name: frame.to_dict(orient="list")}, self.meta))
        return self._record(write_csv(self._path(name, "csv"), frame, self.meta))

    def scalars(self, name: str, values: Mapping[str, Any]) -> str:
        if self.fmt == "json":
            return self._record(write_json(self._path(name, "json"), {name: dict(values)}, self.meta))
        return self._record(write_csv(self._path(name, "csv"), scalar_frame(values), self.meta))

    def matrix(self, name: str, matrix: np.ndarray) -> str:
        if self.fmt == "json":
            return self._record(write_json(self._path(name, "json"), {"N": int(np.shape(matrix)[0]),
                                                                      name: np.asarray(matrix)}, self.meta))
        return self._record(write_matrix(self._path(name, "txt"), matrix, self.meta))
