"""On-disk formats.

Trajectory binary (``.ssep``)::

    8 bytes   magic  b"SSEPTRJ1"
    4 bytes   little-endian uint32 header length L
    L bytes   UTF-8 JSON header (sorted keys): d, n, theta, c, seed, g,
              n_sites, n_replicas, n_snapshots, rng, ...
    records   replica-major, snapshot-minor; each record is a float64 (LE)
              snapshot time followed by ceil(n_sites / 8) bytes of occupancy
              packed with ``numpy.packbits(..., bitorder="little")``

Field binary (``.fld``)::

    8 bytes   magic  b"SSEPFLD1"
    4 bytes   uint32 header length, then JSON header {d, m, t}
    (m+2)**d  float64 (LE) node values in C order
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

TRAJ_MAGIC = b"SSEPTRJ1"
FIELD_MAGIC = b"SSEPFLD1"


def _dump_header(fh, magic: bytes, header: dict):
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(magic)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)


def _load_header(fh, magic: bytes) -> dict:
    got = fh.read(len(magic))
    if got != magic:
        raise ValueError(f"bad magic {got!r}, expected {magic!r}")
    (size,) = struct.unpack("<I", fh.read(4))
    return json.loads(fh.read(size).decode("utf-8"))


def write_trajectory(path, header: dict, times: np.ndarray, snapshots: np.ndarray) -> None:
    """``snapshots`` has shape ``(replicas, n_snapshots, n_sites)``."""
    snapshots = np.asarray(snapshots, dtype=np.uint8)
    if snapshots.ndim == 2:
        snapshots = snapshots[None]
    R, S, N = snapshots.shape
    header = dict(header, n_sites=N, n_replicas=R, n_snapshots=S)
    times = np.asarray(times, dtype="<f8")
    with open(path, "wb") as fh:
        _dump_header(fh, TRAJ_MAGIC, header)
        for r in range(R):
            for s in range(S):
                fh.write(times[s].tobytes())
                fh.write(np.packbits(snapshots[r, s], bitorder="little").tobytes())


def read_trajectory(path):
    with open(path, "rb") as fh:
        header = _load_header(fh, TRAJ_MAGIC)
        R, S, N = header["n_replicas"], header["n_snapshots"], header["n_sites"]
        nbytes = (N + 7) // 8
        times = np.empty(S)
        snaps = np.empty((R, S, N), dtype=np.uint8)
        for r in range(R):
            for s in range(S):
                (times[s],) = struct.unpack("<d", fh.read(8))
                packed = np.frombuffer(fh.read(nbytes), dtype=np.uint8)
                snaps[r, s] = np.unpackbits(packed, bitorder="little")[:N]
    return header, times, snaps


def write_trajectory_csv(path, header: dict, times: np.ndarray, snapshots: np.ndarray) -> None:
    snapshots = np.asarray(snapshots, dtype=np.uint8)
    if snapshots.ndim == 2:
        snapshots = snapshots[None]
    with open(path, "w", newline="") as fh:
        for key in sorted(header):
            fh.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replica", "time", "occupancy"])
        for r in range(snapshots.shape[0]):
            for s, t in enumerate(times):
                w.writerow([r, repr(float(t)), "".join(map(str, snapshots[r, s].tolist()))])


def write_field_csv(path, field) -> None:
    grid = field.grid
    pts = grid.points.reshape(-1, grid.d)
    vals = field.values.reshape(-1)
    with open(path, "w", newline="") as fh:
        fh.write(f"# d: {grid.d}\n# m: {grid.m}\n# t: {field.t!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"u{i}" for i in range(grid.d)] + ["value"])
        for p, v in zip(pts, vals):
            w.writerow([repr(float(x)) for x in p] + [repr(float(v))])


def write_field_binary(path, field) -> None:
    with open(path, "wb") as fh:
        _dump_header(fh, FIELD_MAGIC, {"d": field.grid.d, "m": field.grid.m, "t": field.t})
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path):
    from .pde import Grid, MacroField

    with open(path, "rb") as fh:
        header = _load_header(fh, FIELD_MAGIC)
        grid = Grid(header["d"], header["m"])
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(grid.shape).copy()
    return MacroField(grid, header["t"], values)


def write_distribution_csv(path, probabilities: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "probability"])
        for k, p in enumerate(np.asarray(probabilities, dtype=float)):
            w.writerow([k, repr(float(p))])


def write_measure_csv(path, lattice, measure) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site"] + [f"x{i}" for i in range(lattice.d)] + ["density"])
        for k, (site, p) in enumerate(zip(lattice.sites, measure.densities)):
            w.writerow([k] + site.tolist() + [repr(float(p))])


def write_rows_csv(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    cols = list(rows[0])
    for r in rows[1:]:
        cols.extend(k for k in r if k not in cols)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")
