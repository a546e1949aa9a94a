import numpy as np
import pytest

from vanhove.charfunc import SystemInitState
from vanhove.oracle import (build_discrete, full_moments, initial_moments, oracle_charfunc, oracle_moments,
                            symplectic_floor)
from vanhove.reservoir import two_point_apply
from vanhove.spectral import SpectralModel


@pytest.fixture(scope="module")
def model():
    return SpectralModel.ohmic(n_points=128)


def test_rwa_propagator_unitary(model):
    dm = build_discrete(model, 0.5, 1.0)
    u = dm.propagator(7.0)
    assert np.max(np.abs(u @ np.conj(u).T - np.eye(dm.dim))) < 1e-11
    e = np.eye(dm.dim)[:, :3]
    assert np.allclose(dm.rows(e, 7.0), np.conj(e).T @ u, atol=1e-12)


def test_cr_propagator_symplectic(model):
    dm = build_discrete(model, 0.5, 1.0, variant="CR")
    u = dm.propagator(5.0)
    d = dm.dim
    eta = np.diag(np.concatenate([np.ones(d), -np.ones(d)]))
    assert np.max(np.abs(u @ eta @ np.conj(u).T - eta)) < 1e-9
    # z = (c, c^dag): the lower block is the conjugate of the upper one
    assert np.allclose(u[d:, d:], np.conj(u[:d, :d]), atol=1e-10)
    assert np.allclose(u[d:, :d], np.conj(u[:d, d:]), atol=1e-10)


def test_decoupled(model):
    dm = build_discrete(model, 0.0, 1.3)
    u = dm.propagator(2.0)
    assert np.allclose(np.diag(u), np.exp(-2j * np.concatenate([[1.3], model.grid.nodes])), atol=1e-12)


def test_resampling_and_errors(model):
    assert build_discrete(model, 0.2, 1.0, M=64).M == 64
    with pytest.raises(ValueError):
        build_discrete(model, 0.2, 1.0, M=1)
    with pytest.raises(ValueError):
        build_discrete(model, 0.2, 1.0, variant="JC")


def test_initial_moments(small):
    model, state, pert, xi, sys, _ = small
    init = initial_moments(state, pert, xi, sys)
    init.check_positive()
    grid = model.grid
    nxi = two_point_apply(state, pert, xi.values)
    assert np.allclose(init.mean[1:], np.sqrt(grid.weights) * nxi * sys.alpha)
    assert np.allclose(init.normal, np.conj(init.normal).T)
    bad = initial_moments(state, pert, 4 * xi.values, sys)
    with pytest.raises(ValueError):
        bad.check_positive()


def test_moments_at_zero(small):
    model, state, pert, xi, sys, _ = small
    init = initial_moments(state, pert, xi, sys)
    for variant in ("RWA", "CR"):
        rec = oracle_moments(build_discrete(model, 0.3, 1.0, variant=variant), init, 0.0)
        assert abs(rec.occupation - (sys.n0 + abs(sys.alpha) ** 2)) < 1e-10
        assert abs(rec.a - sys.alpha) < 1e-10 and abs(rec.aa - sys.alpha ** 2) < 1e-10


def test_charfunc_consistency(small, rng):
    model, state, pert, xi, sys, _ = small
    init = initial_moments(state, pert, xi, sys)
    dm = build_discrete(model, 0.3, 1.0, variant="CR")
    mom = full_moments(dm, init, 6.0)
    assert abs(oracle_charfunc(dm, init, 0.0, np.zeros(dm.M), 6.0, moments=mom) - 1) < 1e-14
    # second derivative along J_a recovers <a a^dag>
    rec = oracle_moments(dm, init, 6.0)
    h = 1e-4
    for _ in range(3):
        ja = complex(*rng.normal(size=2))
        g = oracle_charfunc(dm, init, ja, np.zeros(dm.M), 6.0, moments=mom)
        assert abs(g) <= 1 + 1e-12
    g = [oracle_charfunc(dm, init, s, np.zeros(dm.M), 6.0, moments=mom) for s in (h, -h, 1j * h, -1j * h)]
    # ln G ~ -|J|^2 <a a^dag>_connected + ..., so the Laplacian is -4 <a a^dag>_c
    lap = (sum(np.log(x) for x in g)).real / h**2
    assert abs(-lap / 4 - (rec.anti[0, 0] - abs(rec.a) ** 2).real) < 1e-5


def test_symplectic_floor(small):
    model, state, pert, xi, sys, _ = small
    init = initial_moments(state, pert, xi, sys)
    dm = build_discrete(model, 0.3, 1.0, variant="CR")
    for t in (0.0, 10.0):
        assert symplectic_floor(dm, init, t) >= 0.5 - 1e-8
    pure = initial_moments(state, pert, 0 * xi.values, SystemInitState(0.2, 0.0))
    assert abs(symplectic_floor(build_discrete(model, 0.0, 1.0, variant="CR"), pure, 0.0) - 0.5) < 1e-10
