"""Gaussian-mixture densities of point sets and the symmetric density misfit.

The mixture component is ``(2 pi s^2)^(-d/2) exp(-|x - c|^2 / s^2)``. Note the
exponent divides by ``s^2``, not ``2 s^2``; this is deliberate and the sigma
schedule defaults are tuned for it.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .numerics import as_matrix


@dataclass(frozen=True)
class KernelConfig:
    sigma: float
    d: int
    normalized: bool = True

    def __post_init__(self):
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")

    @property
    def norm_const(self):
        return (2.0 * math.pi * self.sigma**2) ** (-0.5 * self.d)

    @property
    def inv_s2(self):
        return 1.0 / self.sigma**2

    def weight(self, m):
        """Mixture weight of each of ``m`` centres."""
        return 1.0 / m if self.normalized else 1.0


def _pair(A, B, cfg):
    A = as_matrix(A, "evaluation points")
    B = as_matrix(B, "mixture centres")
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("point sets must be non-empty")
    if A.shape[1] != B.shape[1] or A.shape[1] != cfg.d:
        raise ValueError(f"dimension mismatch: {A.shape[1]}, {B.shape[1]}, kernel d={cfg.d}")
    return A, B


def density_vector(A, B, cfg):
    """Mixture density with centres ``B`` evaluated at every row of ``A``."""
    A, B = _pair(A, B, cfg)
    sums = _kernels.gauss_sums(A, B, cfg.inv_s2)
    return (cfg.norm_const * cfg.weight(B.shape[0])) * sums


def density_at(x, points, cfg):
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(density_vector(x, points, cfg)[0])


def _residuals(T, R, cfg):
    c = cfg.norm_const
    wT, wR = cfg.weight(T.shape[0]), cfg.weight(R.shape[0])
    s = cfg.inv_s2
    g = _kernels.gauss_sums
    # a: residual at the T sites, b: residual at the R sites
    a = c * (wT * g(T, T, s) - wR * g(T, R, s))
    b = c * (wT * g(R, T, s) - wR * g(R, R, s))
    return a, b


def _misfit_from(a, b):
    return 0.5 * float(a @ a) / a.size + 0.5 * float(b @ b) / b.size


def misfit(T, R, cfg):
    """Symmetric misfit ``|p(T;T) - p(T;R)|^2 / 2n + |p(R;T) - p(R;R)|^2 / 2m``."""
    T, R = _pair(T, R, cfg)
    return _misfit_from(*_residuals(T, R, cfg))


def misfit_and_grad(T, R, cfg):
    """Misfit and its gradient with respect to the rows of ``T``.

    ``T`` enters both as evaluation sites and as mixture centres; both paths
    are differentiated.
    """
    T, R = _pair(T, R, cfg)
    n, m = T.shape[0], R.shape[0]
    a, b = _residuals(T, R, cfg)
    wT, wR = cfg.weight(n), cfg.weight(m)
    u = (wT / n) * a
    p = (-wR / n) * a
    q = (wT / m) * b
    raw = _kernels.pair_grad(T, R, u, p, q, cfg.inv_s2)
    grad = (-2.0 * cfg.inv_s2 * cfg.norm_const) * raw
    return _misfit_from(a, b), grad


def misfit_grad(T, R, cfg):
    return misfit_and_grad(T, R, cfg)[1]
