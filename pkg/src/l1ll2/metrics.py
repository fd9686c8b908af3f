"""Accuracy and efficiency figures of merit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import SeparableOperator, apply_forward

__all__ = ["MetricRow", "erel2", "rmsd", "pal", "peg", "aggregate"]


def erel2(f, f_true) -> float:
    """Squared relative error ``||f - f*||^2 / ||f*||^2``."""
    f = np.asarray(f, dtype=float).ravel()
    f_true = np.asarray(f_true, dtype=float).ravel()
    if f.shape != f_true.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {f_true.shape}")
    den = float(f_true @ f_true)
    if den == 0:
        raise ValueError("true map is identically zero")
    d = f - f_true
    return float(d @ d) / den


def rmsd(op: SeparableOperator, f, s) -> float:
    """Root mean squared data misfit ``||K f - s|| / sqrt(M)``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (op.m,):
        raise ValueError(f"data has shape {s.shape}, operator expects ({op.m},)")
    return float(np.linalg.norm(apply_forward(op, f) - s)) / math.sqrt(op.m)


def pal(err_m: float, err_min: float) -> float:
    """Percentage accuracy loss of a method against the most accurate one."""
    if err_min == 0:
        raise ZeroDivisionError("reference error is zero")
    return 100.0 * (err_m - err_min) / err_min


def peg(time_m: float, time_max: float) -> float:
    """Percentage efficiency gain of a method against the slowest one."""
    if time_max == 0:
        raise ZeroDivisionError("reference time is zero")
    return 100.0 * (time_max - time_m) / time_max


@dataclass(frozen=True)
class MetricRow:
    method: str
    erel2: float | None
    rmsd: float
    wall_time: float
    n_realizations: int = 1
    erel2_std: float | None = None
    rmsd_std: float = 0.0
    wall_time_std: float = 0.0


def aggregate(method: str, erel2s, rmsds, times) -> MetricRow:
    """Mean and (population) standard deviation over noise realizations.

    ``erel2s`` may be empty when no ground truth is available.
    """
    rmsds = np.asarray(rmsds, dtype=float)
    times = np.asarray(times, dtype=float)
    if rmsds.size == 0:
        raise ValueError("no realizations to aggregate")
    e = np.asarray(erel2s, dtype=float)
    return MetricRow(
        method=method,
        erel2=float(e.mean()) if e.size else None,
        rmsd=float(rmsds.mean()),
        wall_time=float(times.mean()),
        n_realizations=int(rmsds.size),
        erel2_std=float(e.std()) if e.size else None,
        rmsd_std=float(rmsds.std()),
        wall_time_std=float(times.std()),
    )
