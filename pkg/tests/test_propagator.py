import numpy as np
import pytest

from vanhove.oracle import build_discrete
from vanhove.propagator import StabilityError, TimeGrid, convolve, kernel_samples, solve, solve_f_fbar, solve_g
from vanhove.spectral import SpectralModel, delta_bar, gamma, lamb_shift, laplace_k


@pytest.fixture(scope="module")
def model():
    return SpectralModel.ohmic(n_points=512)


def test_time_grid():
    tg = TimeGrid(10.0, 400)
    assert tg.dt == 0.025 and tg.times[-1] == 10.0
    assert tg.index(2.5) == 100
    with pytest.raises(ValueError):
        tg.index(2.51)
    tg.check_resolution(20.0)
    with pytest.raises(ValueError):
        TimeGrid(10.0, 300).check_resolution(20.0)
    fit = TimeGrid.fitting(8.15, 0.025, multiple=12)
    assert fit.dt <= 0.025 and fit.n_steps % 12 == 0


def test_convolve_closed_forms():
    tg = TimeGrid(5.0, 2000)
    t, dt = tg.times, tg.dt
    one = np.ones_like(t)
    assert np.allclose(convolve(one, one, dt), t, atol=1e-12)
    got = convolve(np.exp(-t), np.exp(-2 * t), dt)
    assert np.max(np.abs(got - (np.exp(-t) - np.exp(-2 * t)))) < 1e-6
    delta = np.zeros_like(t)
    delta[0] = 2.0 / dt  # trapezoid gives the first node half weight
    b = np.cos(t)
    assert np.allclose(convolve(delta, b, dt)[1:], b[1:], atol=1e-12)
    with pytest.raises(ValueError):
        convolve(one, one[:-1], dt)


def test_rwa_initial_values(model):
    p = solve_g(model, 0.3, 1.0, TimeGrid(5.0, 1000))
    assert p.values[0] == 1.0
    slope = (p.values[1] - p.values[0]) / p.grid.dt
    assert abs(slope + 1j) < 10 * p.grid.dt
    assert np.all(np.abs(p.values) <= 1 + 1e-9)


def test_decoupled_limit(model):
    tg = TimeGrid(20.0, 1000)
    for variant in ("RWA", "CR"):
        p = solve(model, 0.0, 1.3, tg, variant)
        assert np.max(np.abs(p.values - np.exp(-1.3j * tg.times))) < 1e-12
    cr = solve_f_fbar(model, 0.0, 1.3, tg)
    assert abs(cr.fbar[0]) < 1e-15 and abs(cr.fbar[1]) < 1e-3


def test_cr_initial_values(model):
    p = solve_f_fbar(model, 0.3, 1.0, TimeGrid(5.0, 1000))
    dt = p.grid.dt
    assert p.values[0] == 1.0 and p.fbar[0] == 0.0
    assert abs((p.values[1] - 1) / dt + 1j) < 10 * dt
    assert abs(p.fbar[1] / dt) < 10 * dt


@pytest.mark.parametrize("variant", ["RWA", "CR"])
def test_against_oracle(model, variant):
    lam = 0.4
    tg = TimeGrid(40.0, 4000)
    p = solve(model, lam, 1.0, tg, variant)
    dm = build_discrete(model, lam, 1.0, variant=variant)
    d = dm.dim
    for j in (400, 2000, 4000):
        u = dm.propagator(tg.times[j])
        if variant == "RWA":
            ref, got = u[0, 0], p.values[j]
        else:
            # a(t) = (F + lam^2 Fbar) a + lam^2 Fbar a^dag + ...
            ref = np.array([u[0, 0], u[0, d]])
            got = np.array([p.values[j] + lam**2 * p.fbar[j], lam**2 * p.fbar[j]])
            assert abs(got[1] - ref[1]) < 1e-4 * abs(ref[0])
            ref, got = ref[0], got[0]
        assert abs(got - ref) < 1e-4 * abs(ref)


def test_second_order_in_dt(model):
    lam, T = 0.4, 10.0
    ref = build_discrete(model, lam, 1.0).propagator(T)[0, 0]
    errs = [abs(solve_g(model, lam, 1.0, TimeGrid(T, n)).values[-1] - ref) for n in (500, 1000, 2000)]
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_laplace_consistency(model):
    lam, s = 0.5, 1.0
    tg = TimeGrid(40.0, 16000)
    g = solve_g(model, lam, 1.0, tg).values
    w = np.full(tg.n_steps + 1, tg.dt)
    w[0] = w[-1] = 0.5 * tg.dt
    num = np.sum(w * g * np.exp(-s * tg.times))
    exact = 1.0 / (s + 1j + lam**2 * laplace_k(model, s))
    assert abs(num - exact) < 2e-6


@pytest.mark.parametrize("variant", ["RWA", "CR"])
def test_weak_coupling_limit(variant):
    model = SpectralModel.ohmic(n_points=4097)
    lam = 0.1
    gam = gamma(model, 1.0)
    shift = lamb_shift(model, 1.0) - (delta_bar(model, 1.0) if variant == "CR" else 0.0)
    tg = TimeGrid.fitting(3 / gam / lam**2, 0.025)
    p = solve(model, lam, 1.0, tg, variant)
    tau = lam**2 * tg.times
    err = np.abs(p.values * np.exp(1j * tg.times) - np.exp(-0.5 * gam * tau - 1j * shift * tau))
    assert err.max() < 0.02


def test_kernel_samples_closed_form():
    model = SpectralModel.ohmic(n_points=4097)
    tg = TimeGrid(5.0, 200)
    exact = (1 / (2 * np.pi)) / (1 + 1j * tg.times) ** 2
    assert np.max(np.abs(kernel_samples(model, tg) - exact)) < 1e-6


def test_errors(model):
    with pytest.raises(ValueError):
        solve(model, -0.1, 1.0, TimeGrid(5.0, 400))
    with pytest.raises(ValueError):
        solve(model, 0.1, 1.0, TimeGrid(5.0, 400), "XY")
    with pytest.raises(StabilityError):
        solve(model, 3.0, 1.0, TimeGrid(100.0, 4000), "CR")


def test_csv_export(model, tmp_path):
    p = solve(model, 0.2, 1.0, TimeGrid(1.0, 40), "CR")
    p.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "t,re,im,re_fbar,im_fbar" and len(lines) == 42
