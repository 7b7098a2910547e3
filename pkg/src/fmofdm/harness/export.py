"""CSV and PGM writers. Output bytes depend only on their inputs."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..metrics import SweepResult
from ..radar import RangeDopplerMap

CSV_HEADER = "scenario,waveform,snr_db,ber,rmse_range_m,rmse_velocity_mps,trials,ci95"
DB_FLOOR = -60.0


def _num(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def csv_text(result: SweepResult) -> str:
    lines = [CSV_HEADER]
    for p in result.points:
        lines.append(
            ",".join(
                [
                    p.scenario,
                    p.waveform,
                    _num(p.snr_db),
                    _num(p.ber),
                    _num(p.rmse_range),
                    _num(p.rmse_velocity),
                    str(p.trials),
                    _num(p.ci95),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def export_csv(result: SweepResult, path) -> Path:
    """One row per (waveform, SNR) under the fixed header; UTF-8, LF endings."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(result))
    return path


def rdm_pixels(rdm: RangeDopplerMap, scale: str = "db") -> np.ndarray:
    """
    8-bit image, rows = range bins, columns = Doppler bins.

    ``linear`` min-max normalizes magnitudes (a constant grid maps to mid
    gray); ``db`` maps [-60 dB, 0 dB] relative to the peak onto [0, 255].
    """
    grid = np.asarray(rdm.grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty range-Doppler map")
    if scale == "linear":
        lo, hi = grid.min(), grid.max()
        if hi == lo:
            return np.full(grid.shape, 128, dtype=np.uint8)
        norm = (grid - lo) / (hi - lo)
    elif scale == "db":
        db = rdm.to_db(DB_FLOOR)
        norm = (db - DB_FLOOR) / -DB_FLOOR
    else:
        raise ValueError(f"scale must be 'linear' or 'db', got {scale!r}")
    return np.rint(np.clip(norm, 0.0, 1.0) * 255.0).astype(np.uint8)


def _sidecar_text(rdm: RangeDopplerMap, scale: str) -> str:
    lines = [
        f"rows = {rdm.grid.shape[0]}",
        f"cols = {rdm.grid.shape[1]}",
        "row_axis = range_m",
        "col_axis = velocity_mps",
        f"scale = {scale}",
    ]
    if scale == "db":
        lines.append(f"db_floor = {_num(DB_FLOOR)}")
    else:
        lines.append(f"min = {_num(rdm.grid.min())}")
        lines.append(f"max = {_num(rdm.grid.max())}")
    lines.append("range_m = " + ",".join(_num(v) for v in rdm.range_axis))
    lines.append("velocity_mps = " + ",".join(_num(v) for v in rdm.velocity_axis))
    return "\n".join(lines) + "\n"


def export_rdm(rdm: RangeDopplerMap, path, scale: str = "db") -> tuple[Path, Path]:
    """
    Binary PGM (P5, maxval 255) plus ``<path>.axes.txt`` holding the range
    and velocity axes. Returns both paths.
    """
    pixels = rdm_pixels(rdm, scale)
    path = Path(path)
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    sidecar = path.with_name(path.name + ".axes.txt")
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_sidecar_text(rdm, scale))
    return path, sidecar


def read_pgm(path) -> np.ndarray:
    """Read back a P5 file written by :func:`export_rdm`."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(rows, cols)


def export_rdm_raw(rdm: RangeDopplerMap, path) -> Path:
    """Raw magnitudes as a .npy array (range bins x Doppler bins)."""
    path = Path(path)
    with open(path, "wb") as fh:
        np.save(fh, np.asarray(rdm.grid))
    return path
