"""Generative transport flows trained by minimizing a Gaussian-mixture density misfit.

A residual particle flow carries template samples onto reference samples.
The objective is a symmetric mixture-density misfit plus a kinetic transport
energy, so training is a plain minimization with no discriminator.
"""

from .flow import FlowParams, FlowTrajectory, flow_backward, flow_forward, flow_push, flow_velocity
from .kernel import KernelConfig, density_at, density_vector, misfit, misfit_and_grad, misfit_grad
from .numerics import finite_diff, gaussian_sample, read_points, write_points
from .objective import ObjectiveConfig, ObjectiveValue, energy, evaluate, gradient
from .saddle import SaddleConfig, SaddleTrajectory, run_descent_ascent
from .synthetic import SyntheticTask, evaluate_error, make_task
from .trainer import SigmaSchedule, TrainConfig, TrainHistory, evaluate_full, sigma_at, train

__version__ = "0.1.0"
