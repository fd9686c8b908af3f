"""Outer splitting iteration: parameter update followed by a FISTA solve."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .fista import SmoothProblem, fista_step_loop
from .kernels import SeparableOperator, SingularPair, max_singular_values, unvec
from .upen import PenaltyState, UpenConfig, compute_penalties, l1_floor

__all__ = [
    "SolverOptions",
    "SolveReport",
    "gp_init",
    "solve",
    "solve_l1ll2",
    "solve_a_l1",
]

logger = logging.getLogger(__name__)

Method = Literal["L1LL2", "A_L1", "L1_fixed"]
METHODS = ("L1LL2", "A_L1", "L1_fixed")


@dataclass(frozen=True)
class SolverOptions:
    """Options for :func:`solve`.

    ``alpha`` is only used by ``L1_fixed``.  When it is ``None`` that mode
    uses ``sqrt(N) sigma / ||f0||_1`` with ``sigma`` taken from
    ``noise_sigma`` or, failing that, from the residual of the start point.
    """

    method: Method = "L1LL2"
    tau_outer: float = 1e-3
    tau_inner: float = 1e-7
    max_outer: int = 50
    max_inner: int = 5000
    gp_iters: int = 10
    upen: UpenConfig = field(default_factory=UpenConfig)
    alpha: float | None = None
    noise_sigma: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        for name in ("tau_outer", "tau_inner"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.gp_iters < 0:
            raise ValueError("gp_iters must be >= 0")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class SolveReport:
    f_final: np.ndarray
    map_shape: tuple[int, int]
    method: str
    outer_iters: int
    inner_iters_total: int
    wall_time: float
    stop_reason: str
    eps2_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    penalty_snapshots: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    final_penalties: PenaltyState | None = None

    @property
    def F(self) -> np.ndarray:
        return unvec(self.f_final, self.map_shape)

    @property
    def converged(self) -> bool:
        return self.stop_reason == "tolerance"


def gp_init(op: SeparableOperator, s, iters: int = 10, sv: SingularPair | None = None, history=None):
    """Projected gradient on ``min_{f >= 0} ||K f - s||^2`` from ``f = 0``.

    Uses the fixed step ``1 / (s1 s2)^2`` on ``K^T (K f - s)``, which makes the
    residual non-increasing.  Residual norms are appended to ``history`` if
    given.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    p = SmoothProblem(op, s, 0.0)
    sv = sv or max_singular_values(op)
    L = sv.lipschitz
    f = np.zeros(op.n)
    if L == 0:
        return f
    for _ in range(iters):
        f = np.maximum(f - (p.hessian_apply(f) - p.kts) / L, 0.0)
        if history is not None:
            Hf = p.hessian_apply(f)
            history.append(float(f @ Hf - 2 * f @ p.kts + p.ss))
    return f


def solve(op: SeparableOperator, s, opts: SolverOptions | None = None, f0=None) -> SolveReport:
    """Invert ``s`` with adaptive L1 and local L2 penalties.

    Each outer step sets ``eps2 = ||K f - s||^2``, recomputes the penalty
    weights from the current map, bounds the Lipschitz constant and warm
    starts FISTA from the current map.  Stops once
    ``||f_new - f|| <= tau_outer ||f||`` or after ``max_outer`` steps.
    """
    opts = opts or SolverOptions()
    s = np.asarray(s, dtype=float)
    if s.shape != (op.m,):
        raise ValueError(f"data has shape {s.shape}, operator expects ({op.m},)")
    t0 = time.perf_counter()
    sv = max_singular_values(op)
    f = gp_init(op, s, opts.gp_iters, sv) if f0 is None else np.array(f0, dtype=float)

    use_l2 = opts.method == "L1LL2"
    alpha = None
    if opts.method == "L1_fixed":
        alpha = opts.alpha if opts.alpha is not None else _baseline_alpha(op, f, s, opts.noise_sigma)

    problem = SmoothProblem(op, s, 0.0)
    report = SolveReport(
        f_final=f, map_shape=op.map_shape, method=opts.method,
        outer_iters=0, inner_iters_total=0, wall_time=0.0, stop_reason="max_outer",
    )
    for k in range(opts.max_outer):
        pen = compute_penalties(op, f, s, sv, opts.upen, use_l2=use_l2, alpha=alpha)
        if not math.isfinite(pen.eps2):
            raise FloatingPointError(f"non-finite residual at outer iteration {k}")
        report.eps2_history.append(pen.eps2)
        report.penalty_snapshots.append(pen)
        # gradient of the squared norm carries a factor 2
        st = fista_step_loop(problem.with_lambda(pen.lam), pen.alpha, 2.0 * pen.xi, f,
                             opts.tau_inner, opts.max_inner)
        f_new = st.f
        report.inner_iters.append(st.j)
        report.inner_iters_total += st.j
        report.objective_history.append(st.objective_history[-1] if st.f is not f else st.objective_history[0])
        report.outer_iters = k + 1
        change = float(np.linalg.norm(f_new - f))
        ref = float(np.linalg.norm(f))
        f = f_new
        logger.debug("outer %d: eps2=%.4g alpha=%.3g xi=%.4g inner=%d change=%.3g",
                     k, pen.eps2, pen.alpha, pen.xi, st.j, change / max(ref, 1e-300))
        if change <= opts.tau_outer * ref:
            report.stop_reason = "tolerance"
            break
    report.f_final = f
    report.final_penalties = compute_penalties(op, f, s, sv, opts.upen, use_l2=use_l2, alpha=alpha)
    report.wall_time = time.perf_counter() - t0
    return report


def _baseline_alpha(op, f, s, sigma):
    if sigma is None:
        r = op.forward(f) - s
        sigma = float(np.linalg.norm(r)) / math.sqrt(op.m)
    return math.sqrt(op.n) * sigma / max(float(np.abs(f).sum()), l1_floor(s))


def solve_l1ll2(op, s, opts: SolverOptions | None = None) -> SolveReport:
    return solve(op, s, replace(opts or SolverOptions(), method="L1LL2"))


def solve_a_l1(op, s, opts: SolverOptions | None = None) -> SolveReport:
    """Ablation with all local L2 weights set to zero; alpha still adapts."""
    return solve(op, s, replace(opts or SolverOptions(), method="A_L1"))
