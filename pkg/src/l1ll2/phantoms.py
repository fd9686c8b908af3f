"""Synthetic relaxation maps and noisy IR-CPMG data."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import RelaxGrid, SeparableOperator, apply_forward, relax_grid, vec

__all__ = [
    "PeakSpec",
    "NoisySignal",
    "PRESETS",
    "make_phantom",
    "preset_peaks",
    "preset_phantom",
    "simulate",
    "make_rng",
]

DEFAULT_WIDTH = 0.15  # decades


@dataclass(frozen=True)
class PeakSpec:
    T1_center: float
    T2_center: float
    amplitude: float = 1.0
    width_decades: tuple[float, float] = (DEFAULT_WIDTH, DEFAULT_WIDTH)

    def __post_init__(self):
        if self.T1_center <= 0 or self.T2_center <= 0:
            raise ValueError("peak centers must be > 0")
        if self.amplitude <= 0:
            raise ValueError("peak amplitude must be > 0")
        if min(self.width_decades) <= 0:
            raise ValueError("peak widths must be > 0")


# (T1, T2) peak positions in ms
PRESETS = {
    "2pks": {"shape": (80, 80), "centers": [(814.97, 4.533), (119.54, 8.5606)]},
    "3pks": {
        "shape": (100, 100),
        "centers": [(1582.2, 32.289), (5.9692, 2.6124), (1139.5, 258.08)],
    },
}


def preset_peaks(name: str, width: float = DEFAULT_WIDTH, amplitudes=None) -> list[PeakSpec]:
    try:
        centers = PRESETS[name.lower()]["centers"]
    except KeyError:
        raise ValueError(f"unknown phantom preset {name!r}; choose from {sorted(PRESETS)}") from None
    if amplitudes is None:
        amplitudes = [1.0] * len(centers)
    if len(amplitudes) != len(centers):
        raise ValueError(f"preset {name!r} has {len(centers)} peaks, got {len(amplitudes)} amplitudes")
    return [PeakSpec(T1, T2, a, (width, width)) for (T1, T2), a in zip(centers, amplitudes)]


def make_phantom(peaks, grid: tuple[RelaxGrid, RelaxGrid]) -> np.ndarray:
    """Sum of Gaussians in ``(log10 T1, log10 T2)``, normalized to unit mass.

    Returns the ``N1 x N2`` map (rows index T1).
    """
    peaks = list(peaks)
    if not peaks:
        raise ValueError("at least one peak is required")
    g1, g2 = grid
    x1 = np.log10(g1.values)[:, None]
    x2 = np.log10(g2.values)[None, :]
    F = np.zeros((x1.size, x2.size))
    for pk in peaks:
        lo1, hi1 = g1.bounds
        lo2, hi2 = g2.bounds
        if not (lo1 <= pk.T1_center <= hi1 and lo2 <= pk.T2_center <= hi2):
            raise ValueError(f"peak center ({pk.T1_center}, {pk.T2_center}) outside the grid")
        if pk.T1_center <= pk.T2_center:
            warnings.warn("peak with T1 <= T2 is not physical for IR-CPMG data", stacklevel=2)
        w1, w2 = pk.width_decades
        F += pk.amplitude * np.exp(
            -0.5 * ((x1 - np.log10(pk.T1_center)) / w1) ** 2
            - 0.5 * ((x2 - np.log10(pk.T2_center)) / w2) ** 2
        )
    total = F.sum()
    if not total > 0:
        raise ValueError("phantom vanishes on the grid; widen the peaks")
    return F / total


def preset_phantom(name: str, Tmin=0.1, Tmax=1e4, width=DEFAULT_WIDTH, shape=None):
    """Build a named preset and its grids: returns ``(F, T1grid, T2grid)``."""
    peaks = preset_peaks(name, width)
    n1, n2 = shape or PRESETS[name.lower()]["shape"]
    g1, g2 = relax_grid(Tmin, Tmax, n1), relax_grid(Tmin, Tmax, n2)
    return make_phantom(peaks, (g1, g2)), g1, g2


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator, so independent seeds give independent streams."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class NoisySignal:
    s: np.ndarray
    delta: float
    sigma: float
    seed: int | None


def simulate(F, op: SeparableOperator, delta: float, seed=None) -> NoisySignal:
    """Noisy data ``s = K f + e`` with ``||e||`` exactly ``delta``."""
    if delta < 0:
        raise ValueError("noise level must be >= 0")
    F = np.asarray(F, dtype=float)
    f = vec(F) if F.ndim == 2 else F
    clean = apply_forward(op, f)
    if delta == 0:
        return NoisySignal(clean, 0.0, 0.0, seed)
    g = make_rng(seed).standard_normal(clean.size)
    e = delta * g / np.linalg.norm(g)
    return NoisySignal(clean + e, float(delta), float(delta / np.sqrt(clean.size)), seed)
