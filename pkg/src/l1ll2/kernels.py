"""Separable relaxation kernels and matrix-free Kronecker products.

The 2D data model is ``s = K f + e`` with ``K = kron(K2, K1)``.  The unknown
map ``F`` is stored ``N1 x N2`` (rows index T1, columns index T2) and
``f = vec(F)`` is its column-major flattening, so ``K f = vec(K1 F K2^T)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "TimeGrid",
    "RelaxGrid",
    "SeparableOperator",
    "SingularPair",
    "build_ir_kernel",
    "build_cpmg_kernel",
    "apply_forward",
    "apply_adjoint",
    "max_singular_values",
    "vec",
    "unvec",
    "log_time_grid",
    "linear_time_grid",
    "relax_grid",
]

KernelKind = Literal["IR_CPMG", "CPMG_CPMG", "IDENTITY"]


def vec(F: np.ndarray) -> np.ndarray:
    """Column-major flattening of a 2D array."""
    return np.asarray(F).ravel(order="F")


def unvec(f: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`vec`."""
    f = np.asarray(f)
    if f.ndim != 1 or f.size != shape[0] * shape[1]:
        raise ValueError(f"cannot reshape vector of shape {f.shape} to {shape}")
    return f.reshape(shape, order="F")


def _check_positive_increasing(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError(f"{name} must be a non-empty 1D array")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError(f"{name} entries must be finite and > 0")
    if np.any(np.diff(values) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return values


@dataclass(frozen=True)
class TimeGrid:
    """Acquisition times in ms."""

    values: np.ndarray
    spacing: Literal["logarithmic", "linear"] = "linear"

    def __post_init__(self):
        object.__setattr__(self, "values", _check_positive_increasing(self.values, "time grid"))
        if self.spacing not in ("logarithmic", "linear"):
            raise ValueError(f"unknown spacing {self.spacing!r}")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class RelaxGrid:
    """Log-spaced relaxation times in ms."""

    values: np.ndarray

    def __post_init__(self):
        values = _check_positive_increasing(self.values, "relaxation grid")
        if values.size > 2:
            steps = np.diff(np.log(values))
            if np.max(np.abs(steps - steps.mean())) > 1e-12 * max(1.0, np.abs(np.log(values)).max()):
                raise ValueError("relaxation grid must be logarithmically spaced")
        object.__setattr__(self, "values", values)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.values[0]), float(self.values[-1])

    def __len__(self):
        return self.values.size


def log_time_grid(tmin: float, tmax: float, n: int) -> TimeGrid:
    return TimeGrid(np.geomspace(tmin, tmax, n), "logarithmic")


def linear_time_grid(echo_spacing: float, n: int) -> TimeGrid:
    """CPMG echo times ``t_m = m * echo_spacing`` for ``m = 1..n``."""
    return TimeGrid(echo_spacing * np.arange(1, n + 1), "linear")


def relax_grid(tmin: float, tmax: float, n: int) -> RelaxGrid:
    return RelaxGrid(np.geomspace(tmin, tmax, n))


def _ratio(t, T) -> np.ndarray:
    t = t.values if isinstance(t, TimeGrid) else _check_positive_increasing(t, "time grid")
    T = T.values if isinstance(T, RelaxGrid) else _check_positive_increasing(T, "relaxation grid")
    return t[:, None] / T[None, :]


def build_ir_kernel(t, T) -> np.ndarray:
    """Inversion-recovery kernel ``1 - 2 exp(-t_m / T_n)``."""
    return 1.0 - 2.0 * np.exp(-_ratio(t, T))


def build_cpmg_kernel(t, T) -> np.ndarray:
    """CPMG decay kernel ``exp(-t_m / T_n)``."""
    return np.exp(-_ratio(t, T))


@dataclass(frozen=True)
class SingularPair:
    sigma1_K1: float
    sigma1_K2: float

    @property
    def lipschitz(self) -> float:
        """Largest eigenvalue of ``K^T K``, i.e. ``(s1 * s2)**2``."""
        return (self.sigma1_K1 * self.sigma1_K2) ** 2


@dataclass(frozen=True, eq=False)
class SeparableOperator:
    """``K = kron(K2, K1)`` held as its two small factors."""

    K1: np.ndarray
    K2: np.ndarray
    kind: KernelKind = "IR_CPMG"

    def __post_init__(self):
        K1 = np.ascontiguousarray(self.K1, dtype=float)
        K2 = np.ascontiguousarray(self.K2, dtype=float)
        if K1.ndim != 2 or K2.ndim != 2:
            raise ValueError("kernel factors must be 2D")
        if not (np.all(np.isfinite(K1)) and np.all(np.isfinite(K2))):
            raise ValueError("kernel factors must be finite")
        object.__setattr__(self, "K1", K1)
        object.__setattr__(self, "K2", K2)

    @classmethod
    def ir_cpmg(cls, t1, T1, t2, T2) -> "SeparableOperator":
        return cls(build_ir_kernel(t1, T1), build_cpmg_kernel(t2, T2), "IR_CPMG")

    @classmethod
    def cpmg_cpmg(cls, t1, T1, t2, T2) -> "SeparableOperator":
        return cls(build_cpmg_kernel(t1, T1), build_cpmg_kernel(t2, T2), "CPMG_CPMG")

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.K1.shape[1], self.K2.shape[1]

    @property
    def data_shape(self) -> tuple[int, int]:
        return self.K1.shape[0], self.K2.shape[0]

    @property
    def n(self) -> int:
        return self.K1.shape[1] * self.K2.shape[1]

    @property
    def m(self) -> int:
        return self.K1.shape[0] * self.K2.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize ``kron(K2, K1)``; only sensible for tiny factors."""
        return np.kron(self.K2, self.K1)

    def forward(self, f):
        return apply_forward(self, f)

    def adjoint(self, s):
        return apply_adjoint(self, s)


def apply_forward(op: SeparableOperator, f) -> np.ndarray:
    """Return ``kron(K2, K1) @ f`` computed as ``vec(K1 F K2^T)``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (op.n,):
        raise ValueError(f"expected vector of length {op.n}, got shape {f.shape}")
    F = unvec(f, op.map_shape)
    return vec(op.K1 @ F @ op.K2.T)


def apply_adjoint(op: SeparableOperator, s) -> np.ndarray:
    """Return ``kron(K2, K1)^T @ s`` computed as ``vec(K1^T S K2)``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (op.m,):
        raise ValueError(f"expected vector of length {op.m}, got shape {s.shape}")
    S = unvec(s, op.data_shape)
    return vec(op.K1.T @ S @ op.K2)


def max_singular_values(op: SeparableOperator) -> SingularPair:
    """Exact top singular values of both kernel factors via dense SVD."""
    try:
        s1 = np.linalg.svd(op.K1, compute_uv=False)[0]
        s2 = np.linalg.svd(op.K2, compute_uv=False)[0]
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"SVD of kernel factor failed: {exc}") from exc
    return SingularPair(float(s1), float(s2))
