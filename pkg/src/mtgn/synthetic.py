"""Ground-truth tasks: a Gaussian template pushed through a known random flow."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import FlowParams, flow_push, load_checkpoint, save_checkpoint
from .numerics import as_matrix, gaussian_sample, read_points, write_points

DEFAULT_TASK = dict(d=2, L=10, n_train=1000, n_test=1000, weight_scale=0.5, seed=2)

# sub-stream offsets; stream key = 4 * seed + offset
_THETA, _TEMPLATE, _SOURCE, _TEST = range(4)


def _key(seed, offset):
    return (4 * int(seed) + offset) % 2**64


@dataclass(frozen=True)
class SyntheticTask:
    theta_true: FlowParams
    T_train: np.ndarray
    R_train: np.ndarray
    T_test: np.ndarray
    seed: int

    @property
    def seeds(self):
        return {name: _key(self.seed, k) for k, name in enumerate(("theta", "template", "source", "test"))}


def make_task(d=2, L=10, n_train=1000, n_test=1000, weight_scale=0.5, seed=2):
    """Build a task whose reference set is a fresh Gaussian sample pushed by a random flow.

    The reference rows come from their own standard-normal draw, so there is
    no row correspondence between ``T_train`` and ``R_train``.
    """
    for name, v in (("d", d), ("L", L), ("n_train", n_train), ("n_test", n_test)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if weight_scale < 0:
        raise ValueError("weight_scale must be >= 0")
    layers = weight_scale * gaussian_sample(L * d, d, _key(seed, _THETA)).reshape(L, d, d)
    theta = FlowParams(layers)
    T_train = gaussian_sample(n_train, d, _key(seed, _TEMPLATE))
    source = gaussian_sample(n_train, d, _key(seed, _SOURCE))
    T_test = gaussian_sample(n_test, d, _key(seed, _TEST))
    return SyntheticTask(theta, T_train, flow_push(theta, source), T_test, int(seed))


def evaluate_error(theta, theta_true, T_test):
    """Relative Frobenius error between test points pushed by ``theta`` and by ``theta_true``."""
    if theta.d != theta_true.d:
        raise ValueError(f"flows differ in dimension: {theta.d} vs {theta_true.d}")
    T_test = as_matrix(T_test, "T_test")
    got = flow_push(theta, T_test)
    ref = flow_push(theta_true, T_test)
    return float(np.linalg.norm(got - ref) / np.linalg.norm(ref))


def export_task(task, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_points(out / "T_train.csv", task.T_train)
    write_points(out / "R_train.csv", task.R_train)
    write_points(out / "T_test.csv", task.T_test)
    save_checkpoint(out / "theta_true.json", task.theta_true)
    return out


def load_task(task_dir):
    src = Path(task_dir)
    return SyntheticTask(
        load_checkpoint(src / "theta_true.json"),
        read_points(src / "T_train.csv"),
        read_points(src / "R_train.csv"),
        read_points(src / "T_test.csv"),
        seed=-1,
    )
