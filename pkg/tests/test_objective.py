import math

import numpy as np
import pytest

from mtgn.flow import FlowParams, flow_forward, flow_push
from mtgn.kernel import KernelConfig, misfit
from mtgn.numerics import finite_diff
from mtgn.objective import ObjectiveConfig, energy, evaluate, gradient
from oracles import brute_energy, brute_misfit, brute_push


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def _cfg(sigma, d, alpha):
    return ObjectiveConfig(KernelConfig(sigma, d), alpha)


def test_energy_zero_weights(rng):
    traj = flow_forward(FlowParams.zeros(2, 3), rng.standard_normal((5, 2)))
    assert energy(traj, 1 / 3, 5) == 0.0


def test_energy_hand_value():
    traj = flow_forward(FlowParams(np.ones((1, 1, 1))), np.ones((1, 1)))
    assert energy(traj, 1.0, 1) == pytest.approx(math.tanh(1) ** 2, rel=1e-15)
    assert energy(traj, 1.0, 1) == pytest.approx(0.580026, abs=1e-6)


def test_energy_duplicate_particles(rng):
    p = FlowParams(rng.standard_normal((3, 2, 2)))
    X = rng.standard_normal((4, 2))
    e1 = energy(flow_forward(p, X), p.h, 4)
    e2 = energy(flow_forward(p, np.vstack([X, X])), p.h, 8)
    assert e2 == pytest.approx(e1, rel=1e-14)


def test_energy_matches_brute_force(rng):
    p = FlowParams(rng.standard_normal((4, 3, 3)))
    X = rng.standard_normal((5, 3))
    assert energy(flow_forward(p, X), p.h, 5) == pytest.approx(brute_energy(p.layers.tolist(), X.tolist()), rel=1e-13)


def test_evaluate_identity_on_matched_data(rng):
    T = rng.standard_normal((6, 2))
    val = evaluate(FlowParams.zeros(2, 3), T, T, _cfg(1.0, 2, 0.0))
    assert val.total == 0.0 and val.misfit == 0.0 and val.energy == 0.0


def test_evaluate_alpha_zero_is_pushed_misfit(rng):
    p = FlowParams(rng.standard_normal((2, 2, 2)))
    T, R = rng.standard_normal((5, 2)), rng.standard_normal((6, 2))
    val = evaluate(p, T, R, _cfg(0.9, 2, 0.0))
    assert val.total == misfit(flow_push(p, T), R, KernelConfig(0.9, 2))


def test_evaluate_composes_independently(rng):
    p = FlowParams(rng.standard_normal((3, 2, 2)))
    T, R = rng.standard_normal((4, 2)), rng.standard_normal((5, 2))
    alpha = 0.3
    val = evaluate(p, T, R, _cfg(1.2, 2, alpha))
    pushed = brute_push(p.layers.tolist(), T.tolist())
    want = brute_misfit(pushed, R.tolist(), 1.2) + alpha * brute_energy(p.layers.tolist(), T.tolist())
    assert val.total == pytest.approx(want, rel=1e-12)
    assert val.total == pytest.approx(val.misfit + alpha * val.energy, rel=1e-15)


def test_total_affine_nondecreasing_in_alpha(rng):
    p = FlowParams(rng.standard_normal((2, 2, 2)))
    T, R = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
    totals = [evaluate(p, T, R, _cfg(1.0, 2, a)).total for a in (0.0, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(totals, totals[1:]))
    assert totals[2] - totals[1] == pytest.approx(totals[1] - totals[0], rel=1e-12)


def test_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        evaluate(FlowParams.zeros(2, 1), np.zeros((3, 2)), np.zeros((3, 3)), _cfg(1.0, 2, 0.0))


def _fd_check(p, T, R, cfg):
    val, g = gradient(p, T, R, cfg)
    theta = p.to_vector()
    fd = finite_diff(lambda th: evaluate(p.with_vector(th), T, R, cfg).total, theta, 1e-5)
    return val, _rel(g.to_vector(), fd)


def test_gradient_at_identity_on_matched_data(rng):
    # every residual vanishes, so the exact gradient is 0 and FD returns roundoff;
    # compare absolutely
    T = rng.standard_normal((6, 2))
    p, cfg = FlowParams.zeros(2, 3), _cfg(1.0, 2, 0.0)
    _, g = gradient(p, T, T, cfg)
    fd = finite_diff(lambda th: evaluate(p.with_vector(th), T, T, cfg).total, p.to_vector(), 1e-5)
    assert np.max(np.abs(g.to_vector() - fd)) < 1e-12


def test_gradient_random_configs():
    rng = np.random.default_rng(99)
    for trial in range(20):
        d, L = rng.integers(1, 4), rng.integers(1, 5)
        n, m = rng.integers(1, 9), rng.integers(1, 9)
        alpha = [0.0, 0.1, 1.0][trial % 3]
        sigma = [0.5, 1.0, 5.0][trial % 3]
        p = FlowParams(rng.standard_normal((L, d, d)), rng.standard_normal((L, d)) if trial % 4 == 0 else None)
        T, R = rng.standard_normal((n, d)), rng.standard_normal((m, d))
        val, err = _fd_check(p, T, R, _cfg(sigma, d, alpha))
        assert err < 1e-6, (trial, err)
        assert val.total == pytest.approx(val.misfit + alpha * val.energy, rel=1e-15)


def test_gradient_large_alpha_dominated_by_energy(rng):
    p = FlowParams(rng.standard_normal((3, 2, 2)))
    T, R = rng.standard_normal((6, 2)), rng.standard_normal((6, 2))
    _, g_big = gradient(p, T, R, _cfg(1.0, 2, 1e6))
    # energy-only reference: a huge bandwidth flattens the misfit gradient to ~0
    _, g_energy = gradient(p, T, R, ObjectiveConfig(KernelConfig(1e9, 2), 1.0))
    assert _rel(g_big.to_vector() / 1e6, g_energy.to_vector()) < 1e-4
