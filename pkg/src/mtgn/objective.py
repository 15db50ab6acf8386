"""Training objective: density misfit of the pushed template plus alpha times transport energy."""

from dataclasses import dataclass

import numpy as np

from .flow import flow_backward, flow_forward
from .kernel import KernelConfig, misfit, misfit_and_grad
from .numerics import as_matrix

# tuned for unit-scale 2-D data under the default sigma schedule
DEFAULT_ALPHA = 1e-5


@dataclass(frozen=True)
class ObjectiveConfig:
    kernel: KernelConfig
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ObjectiveValue:
    total: float
    misfit: float
    energy: float


def energy(traj, h, n):
    """Discrete kinetic energy ``(h / n) * sum of squared velocities``."""
    V = traj.velocities
    return h / n * float(np.einsum("ijk,ijk->", V, V))


def _inputs(params, T, R, cfg):
    T = as_matrix(T, "template")
    R = as_matrix(R, "reference")
    if T.shape[1] != params.d or R.shape[1] != params.d or cfg.kernel.d != params.d:
        raise ValueError(
            f"dimension mismatch: template {T.shape[1]}, reference {R.shape[1]}, "
            f"flow {params.d}, kernel {cfg.kernel.d}"
        )
    return T, R


def evaluate(params, T, R, cfg):
    T, R = _inputs(params, T, R, cfg)
    traj = flow_forward(params, T)
    mis = misfit(traj.output, R, cfg.kernel)
    en = energy(traj, params.h, T.shape[0])
    return ObjectiveValue(mis + cfg.alpha * en, mis, en)


def gradient(params, T, R, cfg):
    """Objective value and its gradient (a FlowParams) with respect to the flow weights."""
    T, R = _inputs(params, T, R, cfg)
    n = T.shape[0]
    traj = flow_forward(params, T)
    mis, g_out = misfit_and_grad(traj.output, R, cfg.kernel)
    en = energy(traj, params.h, n)
    g_vel = (2.0 * params.h * cfg.alpha / n) * traj.velocities if cfg.alpha else None
    grad, _ = flow_backward(params, traj, g_out, g_vel)
    return ObjectiveValue(mis + cfg.alpha * en, mis, en), grad
