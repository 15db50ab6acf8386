"""Alternating descent/ascent on the quadratic saddle ``J = th^2/2 - eta^2/20 + 10 th eta``.

A toy illustration of why minimax training is slow: the iterates spiral
around the saddle point at the origin instead of heading straight to it.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import atomic_write_text


@dataclass(frozen=True)
class SaddleConfig:
    mu: float = 0.01
    steps: int = 5000
    theta0: float = 1.0
    eta0: float = 1.0
    simultaneous: bool = False

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"step size mu must be positive, got {self.mu}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class SaddleTrajectory:
    """``points[k] = (theta_k, eta_k)``; ``half[k]`` is the point after the descent half-step."""

    points: np.ndarray
    half: np.ndarray

    def __len__(self):
        return len(self.points)

    def to_csv(self):
        rows = ["k,theta,eta"]
        rows += [f"{k},{t:.17g},{e:.17g}" for k, (t, e) in enumerate(self.points)]
        return "\n".join(rows) + "\n"

    def save(self, path):
        atomic_write_text(path, self.to_csv())


def run_descent_ascent(config=SaddleConfig()):
    """Descend in theta, then ascend in eta using the freshly updated theta.

    With ``simultaneous=True`` both updates read the old iterate (Jacobi
    ordering) instead.
    """
    mu = config.mu
    th, eta = float(config.theta0), float(config.eta0)
    points = np.empty((config.steps + 1, 2))
    half = np.empty((config.steps, 2))
    points[0] = th, eta
    for k in range(config.steps):
        th_new = th - mu * (th + 10.0 * eta)
        pull = th if config.simultaneous else th_new
        eta = eta - mu * (eta / 10.0 - 10.0 * pull)
        half[k] = th_new, points[k, 1]
        th = th_new
        points[k + 1] = th, eta
    return SaddleTrajectory(points, half)


def quadrants_visited(points):
    """Set of quadrant labels 1-4 entered by points strictly off the axes."""
    p = np.asarray(points)
    off = (p[:, 0] != 0) & (p[:, 1] != 0)
    x, y = p[off, 0] > 0, p[off, 1] > 0
    labels = np.where(x & y, 1, np.where(~x & y, 2, np.where(~x & ~y, 3, 4)))
    return set(labels.tolist())


def winding_angle(points):
    """Cumulative signed angle swept about the origin, in radians."""
    p = np.asarray(points)
    ang = np.unwrap(np.arctan2(p[:, 1], p[:, 0]))
    return float(ang[-1] - ang[0])
