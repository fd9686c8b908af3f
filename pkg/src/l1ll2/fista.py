"""FISTA for the fixed-parameter composite problem.

Minimizes ``Psi1(f) + Psi2(f)`` with

    Psi1(f) = ||K f - s||^2 + sum_i lam_i (L f)_i^2
    Psi2(f) = alpha * ||f||_1

The smooth part is evaluated through the small Gram factors ``K1^T K1`` and
``K2^T K2`` so an iteration costs two ``N1 x N2`` matrix products instead of
a pass over the full data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .kernels import SeparableOperator, apply_adjoint, apply_forward, unvec, vec
from .regularizer import LaplacianOp, apply_laplacian

__all__ = [
    "DivergenceError",
    "SmoothProblem",
    "FistaState",
    "psi1",
    "objective",
    "grad_psi1",
    "soft_threshold",
    "momentum_sequence",
    "fista_step_loop",
]


class DivergenceError(FloatingPointError):
    """Raised when an iterate produces a non-finite objective."""


@dataclass(frozen=True, eq=False)
class SmoothProblem:
    """Data term plus pixel-weighted Laplacian penalty for fixed weights."""

    op: SeparableOperator
    s: np.ndarray
    lam: np.ndarray
    lap: LaplacianOp | None = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.shape != (self.op.m,):
            raise ValueError(f"data has shape {s.shape}, operator expects ({self.op.m},)")
        lam = np.broadcast_to(np.asarray(self.lam, dtype=float), (self.op.n,)).copy()
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("L2 weights must be finite and >= 0")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "lam", lam)
        if self.lap is None:
            object.__setattr__(self, "lap", LaplacianOp(self.op.map_shape))
        elif self.lap.shape != self.op.map_shape:
            raise ValueError("Laplacian shape does not match the operator")

    @cached_property
    def gram1(self) -> np.ndarray:
        return self.op.K1.T @ self.op.K1

    @cached_property
    def gram2(self) -> np.ndarray:
        return self.op.K2.T @ self.op.K2

    @cached_property
    def kts(self) -> np.ndarray:
        return apply_adjoint(self.op, self.s)

    @cached_property
    def ss(self) -> float:
        return float(self.s @ self.s)

    def with_lambda(self, lam) -> "SmoothProblem":
        """Same data and operator, new weights; Gram factors are shared."""
        new = SmoothProblem(self.op, self.s, lam, self.lap)
        for name in ("gram1", "gram2", "kts", "ss"):
            if name in self.__dict__:
                new.__dict__[name] = self.__dict__[name]
        return new

    def hessian_apply(self, f: np.ndarray) -> np.ndarray:
        """``(K^T K + L^T diag(lam) L) f``."""
        F = unvec(f, self.op.map_shape)
        out = vec(self.gram1 @ F @ self.gram2)
        if np.any(self.lam):
            out += apply_laplacian(self.lap, self.lam * apply_laplacian(self.lap, f))
        return out


def psi1(p: SmoothProblem, f) -> float:
    """Smooth objective evaluated directly from the residual."""
    f = np.asarray(f, dtype=float)
    r = apply_forward(p.op, f) - p.s
    c = apply_laplacian(p.lap, f)
    return float(r @ r + p.lam @ (c * c))


def objective(p: SmoothProblem, alpha: float, f) -> float:
    return psi1(p, f) + alpha * float(np.abs(f).sum())


def grad_psi1(p: SmoothProblem, y) -> np.ndarray:
    """``2 K^T (K y - s) + 2 L^T diag(lam) L y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (p.op.n,):
        raise ValueError(f"expected vector of length {p.op.n}, got shape {y.shape}")
    return 2.0 * (p.hessian_apply(y) - p.kts)


def soft_threshold(z, theta: float) -> np.ndarray:
    """Proximal map of ``theta * ||.||_1``: ``sign(z) max(|z| - theta, 0)``."""
    if theta < 0:
        raise ValueError("threshold must be >= 0")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - theta, 0.0)


def _next_t(t: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def momentum_sequence(n: int) -> list[float]:
    """First ``n`` momentum scalars ``t_0 = 1, t_{j+1} = (1 + sqrt(1 + 4 t_j^2)) / 2``."""
    ts = [1.0]
    while len(ts) < n:
        ts.append(_next_t(ts[-1]))
    return ts[:n]


@dataclass
class FistaState:
    f_prev: np.ndarray
    f_curr: np.ndarray
    y: np.ndarray
    t: float = 1.0
    j: int = 0
    objective_history: list = field(default_factory=list)
    converged: bool = False

    @property
    def f(self) -> np.ndarray:
        return self.f_curr


def fista_step_loop(
    p: SmoothProblem,
    alpha: float,
    xi: float,
    f0,
    tol: float = 1e-7,
    max_iter: int = 5000,
) -> FistaState:
    """Run FISTA from ``f0`` with constant stepsize ``1 / xi``.

    Parameters
    ----------
    p : SmoothProblem
        Smooth part with fixed L2 weights.
    alpha : float
        L1 weight.
    xi : float
        Upper bound on the Lipschitz constant of ``grad_psi1``.  Note the
        gradient carries a factor 2, so ``xi >= 2 lambda_max(K^T K + L^T Lam L)``.
    f0 : array
        Starting point (warm start).
    tol : float
        Stop when ``|Phi_j - Phi_{j-1}| <= tol * Phi_{j-1}``.
    max_iter : int
        Hard cap on iterations.

    Returns
    -------
    FistaState
        ``f_curr`` is the last iterate, or ``f0`` if the last iterate has a
        larger objective than ``f0``.
    """
    if not xi > 0:
        raise ValueError("stepsize bound xi must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    f0 = np.array(f0, dtype=float)
    if f0.shape != (p.op.n,):
        raise ValueError(f"expected start vector of length {p.op.n}, got shape {f0.shape}")
    b, ss = p.kts, p.ss
    thresh = alpha / xi
    tiny = np.finfo(float).tiny

    def phi(f, Hf):
        # ||Kf - s||^2 + <Lf, Lam Lf> expanded through H = K^T K + L^T Lam L
        return float(f @ Hf - 2.0 * (f @ b) + ss + alpha * np.abs(f).sum())

    Hf_prev = p.hessian_apply(f0)
    phi0 = phi(f0, Hf_prev)
    if not math.isfinite(phi0):
        raise DivergenceError("objective at the starting point is not finite")
    state = FistaState(f_prev=f0, f_curr=f0, y=f0, objective_history=[phi0])
    f_prev, y, Hy = f0, f0, Hf_prev
    t, phi_prev = 1.0, phi0
    f, val = f0, phi0
    for j in range(1, max_iter + 1):
        z = y - (2.0 / xi) * (Hy - b)
        f = soft_threshold(z, thresh)
        Hf = p.hessian_apply(f)
        val = phi(f, Hf)
        if not math.isfinite(val):
            raise DivergenceError(f"non-finite objective at FISTA iteration {j}")
        state.objective_history.append(val)
        state.j = j
        if abs(val - phi_prev) <= tol * max(phi_prev, tiny):
            state.converged = True
            break
        t_next = _next_t(t)
        coef = (t - 1.0) / t_next
        y = f + coef * (f - f_prev)
        Hy = Hf + coef * (Hf - Hf_prev)
        f_prev, Hf_prev = f, Hf
        t, phi_prev = t_next, val
    state.t = t
    state.y = y
    state.f_prev = f_prev
    if val > phi0:
        state.f_curr = f0
    else:
        state.f_curr = f
    return state
