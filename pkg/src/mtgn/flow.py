"""Particle flow generator: forward-Euler residual steps ``x <- x + h tanh(K x + b)``.

Particles are stored as rows, so a layer acts on a batch ``X`` (n x d) as
``X @ K.T``. The time horizon is [0, 1], hence ``h = 1 / L``.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import as_matrix, atomic_write_text


@dataclass(frozen=True)
class FlowParams:
    """Learnable flow weights: ``layers`` has shape (L, d, d), ``biases`` (L, d) or None."""

    layers: np.ndarray
    biases: Optional[np.ndarray] = None

    def __post_init__(self):
        layers = np.array(self.layers, dtype=np.float64)
        if layers.ndim != 3 or layers.shape[1] != layers.shape[2] or layers.shape[0] < 1:
            raise ValueError(f"layers must have shape (L, d, d) with L >= 1, got {layers.shape}")
        if not np.all(np.isfinite(layers)):
            raise ValueError("layer weights must be finite")
        object.__setattr__(self, "layers", layers)
        if self.biases is not None:
            biases = np.array(self.biases, dtype=np.float64)
            if biases.shape != layers.shape[:2]:
                raise ValueError(f"biases must have shape {layers.shape[:2]}, got {biases.shape}")
            if not np.all(np.isfinite(biases)):
                raise ValueError("biases must be finite")
            object.__setattr__(self, "biases", biases)

    @property
    def L(self):
        return self.layers.shape[0]

    @property
    def d(self):
        return self.layers.shape[1]

    @property
    def h(self):
        return 1.0 / self.L

    @property
    def use_bias(self):
        return self.biases is not None

    @classmethod
    def zeros(cls, d, L, use_bias=False):
        return cls(np.zeros((L, d, d)), np.zeros((L, d)) if use_bias else None)

    @classmethod
    def random(cls, d, L, scale, rng, use_bias=False):
        """i.i.d. ``N(0, scale^2)`` weights (biases start at zero)."""
        layers = scale * rng.standard_normal((L, d, d))
        return cls(layers, np.zeros((L, d)) if use_bias else None)

    @property
    def size(self):
        return self.layers.size + (self.biases.size if self.use_bias else 0)

    def to_vector(self):
        if self.use_bias:
            return np.concatenate([self.layers.ravel(), self.biases.ravel()])
        return self.layers.ravel().copy()

    def with_vector(self, theta):
        """Return params of the same shape holding the flat vector ``theta``."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.size:
            raise ValueError(f"expected {self.size} parameters, got {theta.size}")
        k = self.layers.size
        layers = theta[:k].reshape(self.layers.shape)
        biases = theta[k:].reshape(self.biases.shape) if self.use_bias else None
        return FlowParams(layers, biases)

    def to_dict(self):
        out = {
            "d": self.d,
            "L": self.L,
            "h": self.h,
            "use_bias": self.use_bias,
            "layers": [K.ravel().tolist() for K in self.layers],
        }
        if self.use_bias:
            out["biases"] = [b.tolist() for b in self.biases]
        return out

    @classmethod
    def from_dict(cls, obj):
        d, L = int(obj["d"]), int(obj["L"])
        if len(obj["layers"]) != L:
            raise ValueError(f"checkpoint lists {len(obj['layers'])} layers, header says L={L}")
        if abs(float(obj["h"]) * L - 1.0) > 1e-12:
            raise ValueError(f"checkpoint step h={obj['h']} is not 1/L for L={L}")
        layers = np.array(obj["layers"], dtype=np.float64).reshape(L, d, d)
        biases = None
        if obj.get("use_bias"):
            biases = np.array(obj["biases"], dtype=np.float64).reshape(L, d)
        return cls(layers, biases)


@dataclass(frozen=True)
class FlowTrajectory:
    """``states`` (L+1, n, d) and ``velocities`` (L, n, d) of one forward pass."""

    states: np.ndarray
    velocities: np.ndarray

    @property
    def output(self):
        return self.states[-1]


def save_checkpoint(path, params):
    atomic_write_text(path, json.dumps(params.to_dict(), indent=1) + "\n")


def load_checkpoint(path):
    with open(path) as fh:
        return FlowParams.from_dict(json.load(fh))


def _check_input(params, X0):
    X0 = as_matrix(X0, "particles")
    if X0.shape[1] != params.d:
        raise ValueError(f"particles have {X0.shape[1]} columns, flow expects d={params.d}")
    return X0


def flow_velocity(params, x, j):
    """Velocity ``tanh(K_j x) (+ b_j)`` of layer ``j`` at the point ``x``."""
    if not 0 <= j < params.L:
        raise ValueError(f"layer index {j} outside [0, {params.L})")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d,):
        raise ValueError(f"point must have shape ({params.d},), got {x.shape}")
    u = params.layers[j] @ x
    if params.use_bias:
        u = u + params.biases[j]
    return np.tanh(u)


def flow_forward(params, X0):
    X0 = _check_input(params, X0)
    L, h = params.L, params.h
    n, d = X0.shape
    states = np.empty((L + 1, n, d))
    velocities = np.empty((L, n, d))
    states[0] = X0
    for j in range(L):
        u = states[j] @ params.layers[j].T
        if params.use_bias:
            u += params.biases[j]
        velocities[j] = np.tanh(u)
        states[j + 1] = states[j] + h * velocities[j]
    return FlowTrajectory(states, velocities)


def flow_push(params, X0):
    """Final particle positions only."""
    return flow_forward(params, X0).output


def flow_backward(params, traj, grad_out, grad_vel=None):
    """Reverse-mode pass through the Euler steps.

    ``grad_out`` is the loss cotangent on the final states and ``grad_vel``
    (optional, shape (L, n, d)) the direct cotangent on each layer's
    velocities. Returns ``(param_grad, grad_in)`` where ``param_grad`` is a
    FlowParams holding the weight (and bias) gradients.
    """
    L, h = params.L, params.h
    n, d = traj.states.shape[1:]
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (n, d):
        raise ValueError(f"grad_out must have shape {(n, d)}, got {grad_out.shape}")
    if grad_vel is not None:
        grad_vel = np.asarray(grad_vel, dtype=np.float64)
        if grad_vel.shape != traj.velocities.shape:
            raise ValueError(f"grad_vel must have shape {traj.velocities.shape}, got {grad_vel.shape}")
    if traj.velocities.shape[0] != L or d != params.d:
        raise ValueError("trajectory does not match the flow parameters")

    gK = np.empty_like(params.layers)
    gb = np.empty((L, d)) if params.use_bias else None
    lam = grad_out.copy()
    for j in range(L - 1, -1, -1):
        V = traj.velocities[j]
        cot = h * lam
        if grad_vel is not None:
            cot += grad_vel[j]
        du = cot * (1.0 - V * V)
        gK[j] = du.T @ traj.states[j]
        if gb is not None:
            gb[j] = du.sum(axis=0)
        lam += du @ params.layers[j]
    return FlowParams(gK, gb), lam
