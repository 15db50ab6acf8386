"""Mini-batch minimization of the transport objective with coarse-to-fine bandwidth annealing."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .flow import FlowParams
from .kernel import KernelConfig
from .numerics import as_matrix, atomic_write_text, gaussian_sample
from .objective import DEFAULT_ALPHA, ObjectiveConfig, evaluate, gradient

HISTORY_COLUMNS = ("epoch", "sigma", "misfit", "energy", "total", "grad_norm")


class NumericalFailure(FloatingPointError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, epoch, what):
        self.epoch = epoch
        super().__init__(f"non-finite {what} at epoch {epoch}")


@dataclass(frozen=True)
class SigmaSchedule:
    initial: float = 50.0
    factor: float = 2.0
    period: int = 30
    floor: float = 0.78

    def __post_init__(self):
        if not self.floor > 0:
            raise ValueError("sigma floor must be positive")
        if self.initial < self.floor:
            raise ValueError("initial sigma must be >= floor")
        if not self.factor > 1:
            raise ValueError("sigma factor must be > 1")
        if self.period < 1:
            raise ValueError("sigma period must be >= 1")


def sigma_at(epoch, schedule=SigmaSchedule()):
    """Bandwidth for ``epoch``: divide by ``factor`` every ``period`` epochs, never below ``floor``."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    # past this many divisions the floor is reached; capping avoids overflow
    cap = math.ceil(math.log(schedule.initial / schedule.floor) / math.log(schedule.factor)) + 1
    k = min(epoch // schedule.period, cap)
    return max(schedule.floor, schedule.initial / schedule.factor**k)


@dataclass(frozen=True)
class TrainConfig:
    layers: int = 10
    alpha: float = DEFAULT_ALPHA
    learning_rate: float = 5e-3
    epochs: int = 2000
    batch_size: int = 250
    min_batch_size: int = 64
    allow_small_batch: bool = False
    steps_per_epoch: Optional[int] = None
    schedule: SigmaSchedule = field(default_factory=SigmaSchedule)
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    init_std: float = 0.01
    use_bias: bool = False
    normalized: bool = True
    loss_scaling: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")
        if self.batch_size < self.min_batch_size and not self.allow_small_batch:
            raise ValueError(
                f"batch_size {self.batch_size} is below min_batch_size {self.min_batch_size}: "
                "the misfit compares densities estimated from the batch particles, and a small "
                "batch does not represent the distribution (pass allow_small_batch to override)"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        obj["schedule"] = SigmaSchedule(**obj.get("schedule", {}))
        return cls(**obj)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    sigma: float
    misfit: float
    energy: float
    total: float
    grad_norm: float


class TrainHistory(list):
    """List of EpochRecord with CSV export."""

    def column(self, name):
        return np.array([getattr(r, name) for r in self])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in self:
            w.writerow([r.epoch] + [format(getattr(r, c), ".17g") for c in HISTORY_COLUMNS[1:]])
        return buf.getvalue()

    def save(self, path):
        atomic_write_text(path, self.to_csv())


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta, g):
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (g * g)
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * mhat / (np.sqrt(vhat) + self.eps)


class GradientDescent:
    def __init__(self, lr):
        self.lr = lr

    def step(self, theta, g):
        return theta - self.lr * g


def _objective_cfg(sigma, d, config):
    return ObjectiveConfig(KernelConfig(sigma, d, config.normalized), config.alpha)


def evaluate_full(params, T, R, alpha, sigma, normalized=True):
    """Objective on the complete sets, no batching."""
    return evaluate(params, T, R, ObjectiveConfig(KernelConfig(sigma, params.d, normalized), alpha))


def init_params(d, config):
    """Initial flow: i.i.d. ``N(0, init_std^2)`` weights from the config seed."""
    L = config.layers
    layers = config.init_std * gaussian_sample(L * d, d, (2 * config.seed + 1) % 2**64)
    return FlowParams(layers.reshape(L, d, d), np.zeros((L, d)) if config.use_bias else None)


def _steps(n, config):
    if config.steps_per_epoch is not None:
        return max(1, int(config.steps_per_epoch))
    # floor keeps every chunk at least batch_size rows
    return max(1, n // config.batch_size)


def train(T, R, config=TrainConfig(), params=None, callback=None):
    """Fit a flow carrying ``T`` onto ``R``; returns ``(params, history)``.

    Each epoch uses ``sigma_at(epoch)``. The rows of ``T`` and of ``R`` are
    shuffled independently every epoch and split into ``steps`` contiguous
    chunks, so each step sees disjoint fresh rows of both sets. After the
    epoch the full-data objective is recorded together with the mean
    mini-batch gradient norm (unscaled). With ``loss_scaling`` the optimizer
    is fed the gradient of ``objective / c^2``, where ``c`` is the kernel
    normalization constant at the current sigma; minimizers at each sigma are
    unchanged, but Adam's epsilon no longer swamps the tiny raw gradients of
    large bandwidths or high dimensions. ``callback(record, params)`` is invoked after
    every epoch when given.
    """
    T = as_matrix(T, "template")
    R = as_matrix(R, "reference")
    if T.shape[1] != R.shape[1]:
        raise ValueError(f"template has d={T.shape[1]} but reference has d={R.shape[1]}")
    n, d = T.shape
    m = R.shape[0]
    if params is None:
        params = init_params(d, config)
    elif params.d != d:
        raise ValueError("initial params do not match the data dimension")

    if config.optimizer == "adam":
        opt = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    else:
        opt = GradientDescent(config.learning_rate)
    rng = np.random.Generator(np.random.Philox(key=(2 * config.seed) % 2**64))
    steps = _steps(n, config)
    theta = params.to_vector()
    history = TrainHistory()

    for epoch in range(config.epochs):
        sigma = sigma_at(epoch, config.schedule)
        cfg = _objective_cfg(sigma, d, config)
        # optimize objective / c^2 so step sizes do not collapse with sigma and d
        scale = cfg.kernel.norm_const**-2 if config.loss_scaling else 1.0
        t_chunks = np.array_split(rng.permutation(n), steps)
        r_chunks = np.array_split(rng.permutation(m), steps)
        norms = []
        for ti, ri in zip(t_chunks, r_chunks):
            if ti.size == 0 or ri.size == 0:
                continue
            _, g = gradient(params, T[ti], R[ri], cfg)
            gvec = g.to_vector()
            gnorm = float(np.linalg.norm(gvec))
            if not math.isfinite(gnorm):
                raise NumericalFailure(epoch, "gradient")
            norms.append(gnorm)
            theta = opt.step(theta, scale * gvec)
            params = params.with_vector(theta)

        val = evaluate(params, T, R, cfg)
        if not math.isfinite(val.total):
            raise NumericalFailure(epoch, "loss")
        rec = EpochRecord(epoch, sigma, val.misfit, val.energy, val.total, float(np.mean(norms)))
        history.append(rec)
        if callback is not None:
            callback(rec, params)
    return params, history


def save_config(path, config):
    atomic_write_text(path, json.dumps(config.to_dict(), indent=1) + "\n")
