"""Smoothness operators on the ``N1 x N2`` relaxation map.

All operators act on column-major vectorized maps.  Boundaries are
reflective (Neumann): a missing neighbour takes the value of the edge pixel,
so the Laplacian is the graph Laplacian of the grid, symmetric and with the
constants in its null space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .kernels import unvec, vec

__all__ = [
    "LaplacianOp",
    "LocalMaps",
    "apply_laplacian",
    "gradient_magnitude",
    "neighborhood_max_sq",
    "local_maps",
]


@dataclass(frozen=True)
class LaplacianOp:
    shape: tuple[int, int]
    boundary: str = "reflective"

    def __post_init__(self):
        if self.boundary != "reflective":
            raise ValueError(f"unsupported boundary {self.boundary!r}")
        if len(self.shape) != 2 or min(self.shape) < 1:
            raise ValueError(f"invalid map shape {self.shape}")
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def __call__(self, f):
        return apply_laplacian(self, f)


def _laplacian_2d(F: np.ndarray) -> np.ndarray:
    P = np.pad(F, 1, mode="edge")
    return 4.0 * F - P[:-2, 1:-1] - P[2:, 1:-1] - P[1:-1, :-2] - P[1:-1, 2:]


def apply_laplacian(op: LaplacianOp, f) -> np.ndarray:
    """Five-point stencil ``4 F(i,j) - sum of the four neighbours``.

    The operator is self-adjoint, so this also applies ``L^T``.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (op.size,):
        raise ValueError(f"expected vector of length {op.size}, got shape {f.shape}")
    return vec(_laplacian_2d(unvec(f, op.shape)))


def gradient_magnitude(f, shape) -> np.ndarray:
    """Per-pixel norm of the forward-difference gradient.

    Differences across the last row/column are zero (reflective edge).
    """
    F = unvec(np.asarray(f, dtype=float), tuple(shape))
    dx = np.zeros_like(F)
    dy = np.zeros_like(F)
    dx[:-1, :] = F[1:, :] - F[:-1, :]
    dy[:, :-1] = F[:, 1:] - F[:, :-1]
    return vec(np.hypot(dx, dy))


def neighborhood_max_sq(v, shape, radius: int = 1) -> np.ndarray:
    """Max of ``v**2`` over the ``(2r+1) x (2r+1)`` window clipped to the grid."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    V = unvec(np.asarray(v, dtype=float), tuple(shape)) ** 2
    if radius == 0:
        return vec(V)
    # 'nearest' padding only repeats values already inside the clipped window
    return vec(ndimage.maximum_filter(V, size=2 * radius + 1, mode="nearest"))


@dataclass(frozen=True)
class LocalMaps:
    """Curvature ``c = L f`` and gradient magnitude ``p`` of a map."""

    c: np.ndarray
    p: np.ndarray


def local_maps(f, shape) -> LocalMaps:
    op = LaplacianOp(tuple(shape))
    return LocalMaps(c=apply_laplacian(op, f), p=gradient_magnitude(f, shape))
