import numpy as np
import pytest

from schatten.montecarlo import schatten_exact
from schatten.oed import (CGConvergenceError, HeatModel, ObservationAlignmentError,
                          PosteriorCovOp, dense_posterior_cov, posterior_schatten)


@pytest.fixture(scope="module")
def small():
    return HeatModel(nx=30, nt=20)


def test_defaults():
    m = HeatModel()
    assert m.h == pytest.approx(1 / 255) and m.dt == pytest.approx(0.01)
    assert m.obs_steps == (25, 50, 75, 100)
    assert m.n_obs == 68
    assert np.allclose(m.sensor_positions, np.arange(1, 18) / 18)


def test_misaligned_observation_times():
    with pytest.raises(ObservationAlignmentError, match="multiple of dt"):
        HeatModel(nt=30)


def test_sine_mode_decay(small):
    # implicit Euler damps sin(k pi x) by 1 / (1 + dt * kappa * mu_k) per step
    m, k = small, 3
    x = m.grid
    mu = 4 / m.h**2 * np.sin(k * np.pi * m.h / 2) ** 2
    damp = 1 / (1 + m.dt * m.k * mu)
    full = np.concatenate([[0.0], np.sin(k * np.pi * x), [0.0]])
    grid = np.concatenate([[0.0], x, [1.0]])
    at_sensors = np.interp(m.sensor_positions, grid, full)
    expected = np.concatenate([damp**s * at_sensors for s in m.obs_steps])
    assert np.allclose(m.apply_forward(np.sin(k * np.pi * x)), expected, rtol=1e-12, atol=1e-14)


def test_adjoint_identity(small):
    rng = np.random.default_rng(0)
    phi, d = rng.standard_normal(small.nx), rng.standard_normal(small.n_obs)
    lhs = d @ small.apply_forward(phi)
    rhs = small.apply_adjoint(d) @ phi
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_forward_blocks(small):
    X = np.random.default_rng(1).standard_normal((small.nx, 3))
    F = small.forward_matrix()
    assert np.allclose(small.apply_forward(X), F @ X)


@pytest.mark.parametrize("solver", ["cg", "woodbury"])
@pytest.mark.parametrize("forward", ["cached", "march"])
def test_posterior_matches_dense_inverse(small, solver, forward):
    G = dense_posterior_cov(small)
    op = PosteriorCovOp(small, solver=solver, forward=forward)
    X = np.random.default_rng(2).standard_normal((small.nx, 4))
    assert np.allclose(op.apply_block(X), G @ X, rtol=1e-8, atol=1e-8 * np.abs(G).max())
    assert op.matvecs == 4


def test_cg_failure_raises(small):
    op = PosteriorCovOp(small, solver="cg", maxiter=2)
    with pytest.raises(CGConvergenceError) as info:
        op.apply(np.ones(small.nx))
    assert info.value.iterations == 2


def test_posterior_is_spd(small):
    lam = np.linalg.eigvalsh(dense_posterior_cov(small))
    assert lam[0] > 0


def test_posterior_schatten_small(small):
    exact = schatten_exact(dense_posterior_cov(small), 2)
    rep = posterior_schatten(small, 2, "mc", M=20000, seed=4)
    assert rep.value == pytest.approx(exact, rel=0.02)
    rep = posterior_schatten(small, 2.5, "cheby", M=20000, N=12, seed=4)
    assert rep.value == pytest.approx(schatten_exact(dense_posterior_cov(small), 2.5), rel=0.03)
    with pytest.raises(ValueError):
        posterior_schatten(small, 2, "cheby", M=10)


def test_bad_parameters():
    with pytest.raises(ValueError):
        HeatModel(sigma=0.0)
    with pytest.raises(ValueError):
        HeatModel(nx=30, nt=20, sensor_positions=[0.0, 0.5])
