"""Vector field, Jacobian, and the Euler-Maruyama integrator."""

import math

import numpy as np
import pytest

import transferspec as ts
from transferspec.errors import DivergenceError, ValidationError
from transferspec.hopf import GaussianStream


def test_drift_fixed_point_at_origin():
    p = ts.HopfParams(1.0, 0.0, 0.0, 0.0)
    assert np.array_equal(ts.drift(p, (0.0, 0.0)), [0.0, 0.0])


def test_drift_on_limit_cycle_radius():
    p = ts.HopfParams(1.0, 0.0, 0.0, 0.0)
    assert np.allclose(ts.drift(p, (1.0, 0.0)), [0.0, 0.0], atol=0)


def test_drift_pure_rotation():
    p = ts.HopfParams(1.0, 1.0, 0.0, 0.0)
    assert np.allclose(ts.drift(p, (1.0, 0.0)), [0.0, 1.0], atol=0)


def test_jacobian_at_origin():
    p = ts.HopfParams(0.3, 2.0, 5.0, 0.0)
    assert np.array_equal(ts.jacobian(p, (0.0, 0.0)), [[0.3, -2.0], [2.0, 0.3]])
    eig = np.linalg.eigvals(ts.jacobian(ts.HopfParams(-0.5, 2.0, 0.0, 0.0), (0.0, 0.0)))
    assert np.allclose(sorted(eig, key=lambda z: z.imag), [-0.5 - 2j, -0.5 + 2j], atol=1e-14)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    p = ts.HopfParams(-0.4, 1.3, 0.7, 0.0)
    h = 1e-6
    for _ in range(100):
        s = rng.uniform(-1.5, 1.5, size=2)
        jac = ts.jacobian(p, s)
        fd = np.empty((2, 2))
        for col, e in enumerate(np.eye(2)):
            fd[:, col] = (ts.drift(p, s + h * e) - ts.drift(p, s - h * e)) / (2 * h)
        assert np.max(np.abs(jac - fd)) < 1e-6


def test_drift_rotational_equivariance():
    rng = np.random.default_rng(5)
    p = ts.HopfParams(0.2, 0.9, 1.4, 0.0)
    for _ in range(50):
        s = rng.uniform(-2, 2, size=2)
        phi = rng.uniform(0, 2 * np.pi)
        c, sn = np.cos(phi), np.sin(phi)
        rot = np.array([[c, -sn], [sn, c]])
        assert np.max(np.abs(rot @ ts.drift(p, s) - ts.drift(p, rot @ s))) < 1e-12


def test_radial_map_monotone_near_cycle():
    # r -> r + (delta r - r^3) dt has positive slope around sqrt(delta) for small dt
    delta, dt = 1.0, 1e-2
    r = np.linspace(0.8, 1.2, 101)
    slope = 1.0 + (delta - 3 * r**2) * dt
    assert np.all(slope > 0)


def test_simulate_origin_invariant_without_noise():
    p = ts.HopfParams(-1.0, 2.0, 0.3, 0.0)
    traj = ts.simulate(p, ts.SimConfig(dt=1e-3, n_samples=500, spinup_steps=100, seed=3))
    assert np.all(traj.states == 0.0)


def test_simulate_limit_cycle_radius():
    p = ts.HopfParams(1.0, 1.0, 0.0, 0.0)
    cfg = ts.SimConfig(dt=1e-3, n_samples=10_000, sample_stride=1, spinup_steps=0,
                       initial_state=(1.0, 0.0))
    traj = ts.simulate(p, cfg)
    r = np.hypot(traj.states[:, 0], traj.states[:, 1])
    assert np.max(np.abs(r - 1.0)) < 1e-2


def test_simulate_radial_variance_matches_ou_linearization():
    # dr about sqrt(delta) is an Ornstein-Uhlenbeck process with rate 2*delta,
    # so var(r - sqrt(delta)) -> eps^2 / (4 delta) = 1.25e-3 here
    delta, eps = 0.5, 0.05
    expected = eps**2 / (4 * delta)
    p = ts.HopfParams(delta, 1.0, 0.0, eps)
    cfg = ts.SimConfig(dt=1e-2, n_samples=1_000_000, sample_stride=10, seed=71)
    traj = ts.simulate(p, cfg)
    r = np.hypot(traj.states[:, 0], traj.states[:, 1])
    var = np.var(r - math.sqrt(delta))
    assert abs(var - expected) / expected < 0.20

    # independent Monte Carlo of the linearized radial SDE (AR(1) via lfilter)
    from scipy.signal import lfilter

    rng = np.random.default_rng(72)
    dt, n = 1e-2, 2_000_000
    noise = rng.standard_normal(n) * eps * math.sqrt(dt)
    rho = lfilter([1.0], [1.0, -(1.0 - 2 * delta * dt)], noise)
    assert abs(np.var(rho[n // 10 :]) - expected) / expected < 0.20


def test_simulate_deterministic_given_seed():
    p = ts.HopfParams(0.5, 1.0, 0.5, 0.1)
    cfg = ts.SimConfig(dt=1e-2, n_samples=20_000, sample_stride=3, seed=99)
    a = ts.simulate(p, cfg)
    b = ts.simulate(p, cfg)
    assert a.states.tobytes() == b.states.tobytes()


def test_simulate_divergence_error():
    p = ts.HopfParams(1.0, 0.0, 0.0, 0.0)
    cfg = ts.SimConfig(dt=10.0, n_samples=1000, initial_state=(2.0, 0.0), spinup_steps=0)
    with pytest.raises(DivergenceError):
        ts.simulate(p, cfg)


def test_simulate_blowup_radius_configurable():
    p = ts.HopfParams(1.0, 0.0, 0.0, 0.0)
    cfg = ts.SimConfig(dt=1e-3, n_samples=3000, spinup_steps=0,
                       initial_state=(0.5, 0.0), blowup_radius=0.6)
    with pytest.raises(DivergenceError):
        ts.simulate(p, cfg)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dt": 0.0},
        {"n_samples": 0},
        {"sample_stride": 0},
        {"spinup_steps": -1},
        {"initial_state": (float("nan"), 0.0)},
    ],
)
def test_sim_config_validation(kwargs):
    with pytest.raises(ValidationError):
        ts.SimConfig(**kwargs)


def test_hopf_params_validation():
    with pytest.raises(ValidationError):
        ts.HopfParams(0.1, 1.0, 0.0, -0.5)
    with pytest.raises(ValidationError):
        ts.HopfParams(float("inf"), 1.0, 0.0, 0.0)


def test_gaussian_stream_moments_and_chunking():
    z = GaussianStream(7).draw_pairs(500_000).ravel()
    assert abs(z.mean()) < 5e-3
    assert abs(z.std() - 1.0) < 5e-3
    assert abs(np.mean(z**3)) < 2e-2
    # stream position depends only on pair count, not on chunk boundaries
    s1, s2 = GaussianStream(123), GaussianStream(123)
    a = np.vstack([s1.draw_pairs(10), s1.draw_pairs(30)])
    b = s2.draw_pairs(40)
    assert np.array_equal(a, b)


def test_spinup_default_is_tenth_of_steps():
    cfg = ts.SimConfig(dt=1e-2, n_samples=1000, sample_stride=5)
    assert cfg.resolved_spinup() == 500
    assert ts.SimConfig(dt=1e-2, n_samples=10, spinup_steps=42).resolved_spinup() == 42
