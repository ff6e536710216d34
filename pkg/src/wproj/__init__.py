"""Learned manifold projections for Plug-and-Play inverse problems.

Trains a staged 1-Lipschitz distance estimator from manifold samples,
deploys it as an anchored iterative projection operator, and plugs that
operator into first-order solvers for linear inverse problems.
"""

from .autodiff import Rng, Tensor, finite_diff_grad
from .lipnet import LipNet, lipschitz_audit, orthonormalize, toy_net, ct_net
from .manifolds import AnalyticManifold, ExactDistanceStage, brute_force_project
from .optim import Adam, enforce_constraints, gradient_penalty
from .problems import (NoiseModel, RadonGeometry, TOY_MANIFOLD, add_noise,
                       gen_ellipses, psnr, radon_build, ssim, toy_dataset,
                       tv_reconstruct)
from .projection import wp_project, wp_project_batch, wp_trajectory
from .solvers import (LinearOperator, SolverConfig, adjoint_test,
                      linearized_admm, pdhg, power_method_norm, prox_quadratic,
                      relaxed_projected_gradient)
from .training import (ProjectorSchedule, Stage, TrainConfig, dual_loss,
                       dual_loss_value, fit_stage, g_step, grad_norm_monitor,
                       make_exact_schedule, mean_distance_gap, push_forward,
                       smooth_samples, toy_train_config, ct_train_config, train)

__all__ = [
    "Rng", "Tensor", "finite_diff_grad",
    "LipNet", "lipschitz_audit", "orthonormalize", "toy_net", "ct_net",
    "AnalyticManifold", "ExactDistanceStage", "brute_force_project",
    "Adam", "enforce_constraints", "gradient_penalty",
    "NoiseModel", "RadonGeometry", "TOY_MANIFOLD", "add_noise", "gen_ellipses",
    "psnr", "radon_build", "ssim", "toy_dataset", "tv_reconstruct",
    "wp_project", "wp_project_batch", "wp_trajectory",
    "LinearOperator", "SolverConfig", "adjoint_test", "linearized_admm",
    "pdhg", "power_method_norm", "prox_quadratic", "relaxed_projected_gradient",
    "ProjectorSchedule", "Stage", "TrainConfig", "dual_loss", "dual_loss_value",
    "fit_stage", "g_step", "grad_norm_monitor", "make_exact_schedule",
    "mean_distance_gap", "push_forward", "smooth_samples",
    "toy_train_config", "ct_train_config", "train",
]

__version__ = "0.1.0"
