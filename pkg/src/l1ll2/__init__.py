"""Inversion of 2D NMR relaxation data with an adaptive L1 plus local L2 penalty.

The unknown relaxation map is recovered by alternating two steps: the
penalty weights are recomputed from the current map with a uniform-penalty
rule, then the composite problem is solved with FISTA.
"""

__version__ = "0.1.0"

from .fista import DivergenceError, FistaState, SmoothProblem, fista_step_loop, grad_psi1, soft_threshold
from .kernels import (
    RelaxGrid,
    SeparableOperator,
    SingularPair,
    TimeGrid,
    apply_adjoint,
    apply_forward,
    build_cpmg_kernel,
    build_ir_kernel,
    linear_time_grid,
    log_time_grid,
    max_singular_values,
    relax_grid,
    unvec,
    vec,
)
from .metrics import erel2, pal, peg, rmsd
from .phantoms import PeakSpec, make_phantom, preset_phantom, simulate
from .regularizer import LaplacianOp, apply_laplacian, gradient_magnitude, neighborhood_max_sq
from .solver import SolveReport, SolverOptions, gp_init, solve, solve_a_l1, solve_l1ll2
from .upen import PenaltyState, UpenConfig, stepsize_xi, update_alpha, update_lambdas
