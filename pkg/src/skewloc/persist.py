"""Reading and writing paths, step functions, JSON records and run manifests.

Path CSV
    Header ``k,t,position,dL``; one row per grid point ``k = 0..n_steps``.
    ``dL`` on row ``k`` is the local time accrued on the step *ending* at
    ``t_k``, so row 0 always has ``dL = 0``. Floats are written with 17
    significant digits, which round-trips every float64 exactly.

Binary path dump
    ``b"SKWLPATH"`` magic, a little-endian ``uint32`` format version, a
    ``uint32`` header length, a UTF-8 JSON header (process parameters, ``x0``,
    ``T``, ``n_steps``, seed, stream id), then ``positions`` and
    ``localtime_increments`` as little-endian float64.

JSON
    Written with sorted keys, two-space indent and a trailing newline so
    identical content always produces identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import ProcessParams
from .sampler import PathSample
from .statistics import StepFunction

PATH_CSV_HEADER = "k,t,position,dL"
BINARY_MAGIC = b"SKWLPATH"
BINARY_VERSION = 1
SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return "%.17g" % x


# -- JSON ---------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


# -- paths --------------------------------------------------------------------


def path_to_csv(path: PathSample) -> str:
    buf = io.StringIO()
    buf.write(PATH_CSV_HEADER + "\n")
    times = path.times
    dl = np.concatenate([[0.0], path.localtime_increments])
    for k in range(path.n_steps + 1):
        buf.write(f"{k},{_fmt(times[k])},{_fmt(path.positions[k])},{_fmt(dl[k])}\n")
    return buf.getvalue()


def write_path_csv(path: PathSample, filename) -> Path:
    filename = Path(filename)
    filename.write_text(path_to_csv(path), encoding="utf-8")
    return filename


def read_path_csv(filename, params: ProcessParams | None = None) -> PathSample:
    """Read a path CSV.

    The horizon is taken from the last ``t`` value. Without ``params`` the path
    is labelled as standard Brownian motion at threshold 0; estimators only
    need the observations.
    """
    text = Path(filename).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip().replace(" ", "") != PATH_CSV_HEADER:
        raise ValueError(f"{filename}: expected header {PATH_CSV_HEADER!r}")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 4:
            raise ValueError(f"{filename}:{i}: expected 4 columns, got {len(parts)}")
        try:
            k = int(parts[0])
            rows.append((float(parts[1]), float(parts[2]), float(parts[3])))
        except ValueError as exc:
            raise ValueError(f"{filename}:{i}: {exc}") from None
        if k != i - 2:
            raise ValueError(f"{filename}:{i}: expected k={i - 2}, got {k}")
    if len(rows) < 2:
        raise ValueError(f"{filename}: need at least two observations")
    arr = np.array(rows)
    n_steps = len(rows) - 1
    T = float(arr[-1, 0])
    if T <= 0:
        raise ValueError(f"{filename}: final time must be positive")
    return PathSample(
        params or ProcessParams.skew(0.0),
        float(arr[0, 1]),
        T,
        n_steps,
        arr[:, 1].copy(),
        arr[1:, 2].copy(),
    )


def _path_header(path: PathSample) -> dict:
    return {
        "process": path.params.describe(),
        "x0": path.x0,
        "T": path.T,
        "n_steps": path.n_steps,
        "seed": path.seed,
        "stream_id": path.stream_id,
    }


def path_to_bytes(path: PathSample) -> bytes:
    header = json.dumps(_jsonable(_path_header(path)), sort_keys=True).encode("utf-8")
    return b"".join(
        [
            BINARY_MAGIC,
            struct.pack("<II", BINARY_VERSION, len(header)),
            header,
            np.ascontiguousarray(path.positions, dtype="<f8").tobytes(),
            np.ascontiguousarray(path.localtime_increments, dtype="<f8").tobytes(),
        ]
    )


def params_from_dict(d: dict) -> ProcessParams:
    if d["kind"] == "skew":
        return ProcessParams.skew(d["beta"], d.get("r", 0.0))
    return ProcessParams.oscillating(d["sigma_minus"], d["sigma_plus"], d.get("r", 0.0))


def path_from_bytes(data: bytes) -> PathSample:
    if not data.startswith(BINARY_MAGIC):
        raise ValueError("not a binary path dump (bad magic)")
    off = len(BINARY_MAGIC)
    version, hlen = struct.unpack_from("<II", data, off)
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported binary path version {version}")
    off += 8
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    n = int(header["n_steps"])
    expected = off + 8 * (2 * n + 1)
    if len(data) != expected:
        raise ValueError(f"binary path has {len(data)} bytes, expected {expected}")
    pos = np.frombuffer(data, dtype="<f8", count=n + 1, offset=off).astype(float)
    inc = np.frombuffer(data, dtype="<f8", count=n, offset=off + 8 * (n + 1)).astype(float)
    return PathSample(
        params_from_dict(header["process"]),
        float(header["x0"]),
        float(header["T"]),
        n,
        pos,
        inc,
        header.get("seed"),
        header.get("stream_id"),
    )


def write_path_binary(path: PathSample, filename) -> Path:
    filename = Path(filename)
    filename.write_bytes(path_to_bytes(path))
    return filename


def read_path(filename, params: ProcessParams | None = None) -> PathSample:
    """Read either format, sniffing the binary magic."""
    data = Path(filename).read_bytes()
    if data.startswith(BINARY_MAGIC):
        return path_from_bytes(data)
    return read_path_csv(filename, params)


# -- step functions and tables ------------------------------------------------


def write_step_function_csv(fn: StepFunction, filename, value_name: str = "value") -> Path:
    filename = Path(filename)
    lines = [f"k,t,{value_name}"]
    lines += [f"{k},{_fmt(t)},{_fmt(v)}" for k, (t, v) in enumerate(zip(fn.grid, fn.values))]
    filename.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return filename


def write_table_csv(filename, columns: list[str], rows) -> Path:
    """Write rows of numbers/strings with floats at 17 significant digits."""
    filename = Path(filename)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    filename.write_text(buf.getvalue(), encoding="utf-8")
    return filename


def read_table_csv(filename) -> dict[str, np.ndarray]:
    """Read a table written by :func:`write_table_csv` into column arrays."""
    with open(filename, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for col in (rows[0].keys() if rows else []):
        vals = [r[col] for r in rows]
        try:
            out[col] = np.array([float(v) for v in vals])
        except ValueError:
            out[col] = np.array(vals)
    return out


# -- manifest -----------------------------------------------------------------


def sha256_file(filename) -> str:
    h = hashlib.sha256()
    with open(filename, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Inventory of a CLI run: what was asked, with which config, and what was written."""

    command: str
    config: dict
    seed: int | None
    version: str
    duration_s: float
    files: dict = field(default_factory=dict)  # relative name -> sha256
    argv: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add_file(self, filename, base) -> None:
        filename = Path(filename)
        self.files[str(filename.relative_to(base))] = sha256_file(filename)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "argv": list(self.argv),
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "duration_s": self.duration_s,
            "files": dict(sorted(self.files.items())),
            **({"extra": self.extra} if self.extra else {}),
        }

    def write(self, directory) -> Path:
        return write_json(Path(directory) / "manifest.json", self.to_dict())

    @classmethod
    def read(cls, filename) -> "RunManifest":
        d = json.loads(Path(filename).read_text(encoding="utf-8"))
        return cls(
            d["command"], d["config"], d.get("seed"), d["version"], d["duration_s"],
            d.get("files", {}), d.get("argv", []), d.get("extra", {}),
        )


def check_manifest(filename) -> list[str]:
    """Return a list of problems (empty when every checksum matches)."""
    filename = Path(filename)
    base = filename.parent
    manifest = RunManifest.read(filename)
    problems = []
    for name, digest in manifest.files.items():
        target = base / name
        if not target.exists():
            problems.append(f"missing file: {name}")
        elif sha256_file(target) != digest:
            problems.append(f"checksum mismatch: {name}")
    return problems
