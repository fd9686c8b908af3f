"""Uniform-penalty parameter updates.

Every penalty term is driven towards the same share ``eps2 / (N + 1)`` of
the current residual, where ``eps2 = ||K f - s||^2`` and ``N + 1`` counts the
``N`` local Laplacian terms plus the single L1 term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .kernels import SeparableOperator, SingularPair, apply_forward
from .regularizer import LaplacianOp, LocalMaps, apply_laplacian, local_maps, neighborhood_max_sq

__all__ = [
    "UpenConfig",
    "PenaltyState",
    "residual_eps2",
    "auto_beta0",
    "update_lambdas",
    "pointwise_lambdas",
    "update_alpha",
    "stepsize_xi",
    "l1_floor",
    "compute_penalties",
    "miller_parameters",
    "penalty_terms",
]

# Laplacian spectral bound 8, squared
LAPLACIAN_BOUND_SQ = 64.0
DATA_BETA0_REL = 3e-4
CURVATURE_BETA0_REL = 1e-6


@dataclass(frozen=True)
class UpenConfig:
    """Parameters of the local L2 weight rule.

    An explicit ``beta0`` is used as is.  Otherwise ``beta0_mode`` picks the
    floor at each outer iteration: ``"data"`` uses ``beta0_rel * max|s|**2``
    (default factor 3e-4) and ``"curvature"`` uses ``beta0_rel * max(c**2)``
    of the current map (default factor 1e-6).  ``rule="pointwise"`` replaces
    the neighbourhood rule by ``eps2 / ((N+1) (Lf)_i^2 + rho)``.
    """

    beta0: float | None = None
    beta_p: float = 1.0
    beta_c: float = 1.0
    rho: float = 1e-12
    neighborhood_radius: int = 1
    rule: Literal["neighborhood", "pointwise"] = "neighborhood"
    beta0_mode: Literal["data", "curvature"] = "data"
    beta0_rel: float | None = None

    def resolve_beta0(self, f, maps: LocalMaps, s) -> float:
        if self.beta0 is not None:
            return self.beta0
        if self.beta0_mode == "data":
            rel = DATA_BETA0_REL if self.beta0_rel is None else self.beta0_rel
            smax = float(np.max(np.abs(s))) if np.size(s) else 0.0
            return rel * smax * smax if smax > 0 else rel
        rel = CURVATURE_BETA0_REL if self.beta0_rel is None else self.beta0_rel
        return auto_beta0(f, maps, rel)

    def __post_init__(self):
        if self.beta0 is not None and not self.beta0 >= 0:
            raise ValueError("beta0 must be >= 0")
        if self.beta_p < 0 or self.beta_c < 0:
            raise ValueError("beta_p and beta_c must be >= 0")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.neighborhood_radius < 0:
            raise ValueError("neighborhood_radius must be >= 0")
        if self.rule not in ("neighborhood", "pointwise"):
            raise ValueError(f"unknown lambda rule {self.rule!r}")
        if self.beta0_mode not in ("data", "curvature"):
            raise ValueError(f"unknown beta0 mode {self.beta0_mode!r}")
        if self.beta0_rel is not None and not self.beta0_rel > 0:
            raise ValueError("beta0_rel must be > 0")


@dataclass(frozen=True)
class PenaltyState:
    lam: np.ndarray
    alpha: float
    xi: float
    eps2: float


def residual_eps2(op: SeparableOperator, f, s) -> float:
    """``||K f - s||^2``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (op.m,):
        raise ValueError(f"data has shape {s.shape}, operator expects ({op.m},)")
    r = apply_forward(op, f) - s
    return float(r @ r)


def auto_beta0(f, maps: LocalMaps, rel: float = 1e-6) -> float:
    """Default compliance floor ``rel * max(c**2)``.

    Falls back to ``rel * max(f**2)`` and then to ``rel`` when the map has no
    curvature at all (e.g. the zero map), so the floor is always positive.
    """
    for v in (maps.c, np.asarray(f)):
        m = float(np.max(v * v)) if v.size else 0.0
        if m > 0:
            return rel * m
    return rel


def update_lambdas(f, eps2: float, cfg: UpenConfig, maps: LocalMaps, shape, beta0=None) -> np.ndarray:
    """Local L2 weights from the neighbourhood rule.

    ``lam_i = eps2 / ((N+1) (beta0 + beta_p max_I p^2 + beta_c max_I c^2))``
    with the maxima taken over the window around pixel ``i``.  ``beta0``
    overrides the configured floor; without either, the curvature-relative
    floor of ``f`` is used.
    """
    if eps2 < 0:
        raise ValueError("eps2 must be >= 0")
    n = maps.c.size
    if beta0 is None:
        beta0 = cfg.beta0 if cfg.beta0 is not None else auto_beta0(f, maps, cfg.beta0_rel or CURVATURE_BETA0_REL)
    r = cfg.neighborhood_radius
    denom = beta0 + cfg.beta_p * neighborhood_max_sq(maps.p, shape, r) + cfg.beta_c * neighborhood_max_sq(
        maps.c, shape, r
    )
    if np.any(denom <= 0):
        raise ZeroDivisionError("local weight denominator vanished; use beta0 > 0")
    return eps2 / ((n + 1) * denom)


def pointwise_lambdas(f, eps2: float, rho: float, shape) -> np.ndarray:
    """``lam_i = eps2 / ((N+1) (L f)_i^2 + rho)``."""
    c = apply_laplacian(LaplacianOp(tuple(shape)), f)
    return eps2 / ((c.size + 1) * c * c + rho)


def l1_floor(s) -> float:
    """Lower bound applied to ``||f||_1`` before dividing by it."""
    return 1e-12 * max(1.0, float(np.abs(s).sum()))


def update_alpha(f, eps2: float, floor: float = 1e-12) -> float:
    """``alpha = eps2 / ((N+1) max(||f||_1, floor))``."""
    f = np.asarray(f, dtype=float)
    return eps2 / ((f.size + 1) * max(float(np.abs(f).sum()), floor))


def stepsize_xi(sv: SingularPair, lam) -> float:
    """``(s1 s2)^2 + 64 max_i |lam_i|``, a bound on ``lambda_max(K^T K + L^T Lam L)``."""
    lam = np.asarray(lam, dtype=float)
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    return sv.lipschitz + LAPLACIAN_BOUND_SQ * top


def compute_penalties(op, f, s, sv: SingularPair, cfg: UpenConfig, use_l2=True, alpha=None) -> PenaltyState:
    """All parameters for one outer iteration at iterate ``f``.

    ``use_l2=False`` zeroes the local weights; a given ``alpha`` is kept fixed.
    """
    eps2 = residual_eps2(op, f, s)
    shape = op.map_shape
    if not use_l2:
        lam = np.zeros(op.n)
    elif cfg.rule == "pointwise":
        lam = pointwise_lambdas(f, eps2, cfg.rho, shape)
    else:
        maps = local_maps(f, shape)
        lam = update_lambdas(f, eps2, cfg, maps, shape, beta0=cfg.resolve_beta0(f, maps, s))
    if alpha is None:
        alpha = update_alpha(f, eps2, l1_floor(s))
    return PenaltyState(lam=lam, alpha=float(alpha), xi=stepsize_xi(sv, lam), eps2=eps2)


def penalty_terms(f, lam, alpha: float, shape) -> np.ndarray:
    """The ``N + 1`` weighted penalties ``lam_i (L f)_i^2`` and ``alpha ||f||_1``."""
    c = apply_laplacian(LaplacianOp(tuple(shape)), f)
    return np.append(np.asarray(lam) * c * c, alpha * float(np.abs(f).sum()))


def miller_parameters(f, eps2: float, shape) -> tuple[np.ndarray, float]:
    """Weights making every non-zero penalty term equal to ``eps2 / N0``.

    ``N0`` counts the non-zero terms among ``(L f)_i^2`` and ``||f||_1``;
    weights of vanishing terms are set to zero.
    """
    c2 = apply_laplacian(LaplacianOp(tuple(shape)), f) ** 2
    l1 = float(np.abs(f).sum())
    n0 = int(np.count_nonzero(c2)) + (l1 != 0)
    if n0 == 0:
        return np.zeros_like(c2), 0.0
    share = eps2 / n0
    lam = np.zeros_like(c2)
    nz = c2 != 0
    lam[nz] = share / c2[nz]
    return lam, (share / l1 if l1 else 0.0)
