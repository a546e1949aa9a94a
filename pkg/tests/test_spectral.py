import numpy as np
import pytest

from vanhove.spectral import (FrequencyGrid, SpectralModel, delta_bar, fourier_direct, fourier_series,
                              gamma, lamb_shift, laplace_k, laplace_l, laplace_transform, memory_kernel,
                              principal_value)

# High-precision references (mpmath quadrature on [0, 20], analytic log term for the PV)
# for the ohmic family eta = 1, omega_c = 1 at omega = 1.
DELTA_1 = -0.0481961138810370
DELTA_BAR_1 = 0.0642433122652422
KHAT_1 = 0.0546502999149062 - 0.0602481631848686j
LHAT_1 = -0.120496326369737


def test_grid_invariants():
    g = FrequencyGrid(20.0, 2048)
    assert g.nodes[0] == 0 and g.nodes[-1] == 20.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.weights.sum() == pytest.approx(20.0, rel=1e-14)


def test_grid_domain():
    g = FrequencyGrid(10.0, 101)
    with pytest.raises(ValueError):
        g.check_domain(10.5)
    with pytest.raises(ValueError):
        g.check_domain(0.0, open_interval=True)


def test_gamma_examples(ohmic):
    flat = SpectralModel.flat(0.01, 10.0)
    assert gamma(flat, 3.0) == pytest.approx(2 * np.pi * 0.01, rel=1e-15)
    zero = SpectralModel.flat(0.0, 10.0)
    assert np.all(gamma(zero, zero.grid.nodes) == 0)
    assert gamma(ohmic, 1.0) == pytest.approx(np.exp(-1.0), rel=1e-14)
    with pytest.raises(ValueError):
        gamma(ohmic, 25.0)


def test_gamma_linear_in_eta():
    a, b = SpectralModel.ohmic(eta=1.0), SpectralModel.ohmic(eta=3.0)
    w = np.linspace(0, 20, 9)
    assert np.allclose(gamma(b, w), 3 * gamma(a, w))
    assert np.all(gamma(a, w) >= 0)


def test_lamb_shift_against_reference(ohmic):
    assert lamb_shift(ohmic, 1.0) == pytest.approx(DELTA_1, abs=1e-6)
    fine = ohmic.refined(16385)
    assert lamb_shift(fine, 1.0) == pytest.approx(DELTA_1, abs=2e-8)


def test_lamb_shift_trivial_cases():
    zero = SpectralModel.flat(0.0, 10.0)
    assert lamb_shift(zero, 3.0) == 0.0
    g = FrequencyGrid(10.0, 2001)
    w = 5.0
    window = np.where(np.abs(g.nodes - w) <= 1.0 + 1e-12, 1.0, 0.0)
    # symmetric window around w: antisymmetric integrand, principal value 0
    tab = SpectralModel("tabulated", {"values": window}, g)
    assert abs(lamb_shift(tab, w)) < 1e-12
    with pytest.raises(ValueError):
        lamb_shift(SpectralModel.ohmic(), 20.0)


def test_delta_bar(ohmic):
    assert delta_bar(ohmic, 1.0) == pytest.approx(DELTA_BAR_1, abs=2e-6)
    assert delta_bar(ohmic.refined(16385), 1.0) == pytest.approx(DELTA_BAR_1, abs=2e-8)
    assert delta_bar(SpectralModel.flat(0.0, 10.0), 1.0) == 0.0
    assert delta_bar(ohmic, 2.5) > 0


@pytest.mark.parametrize("fn, ref", [(delta_bar, DELTA_BAR_1), (lamb_shift, DELTA_1)])
def test_grid_refinement_is_second_order(ohmic, fn, ref):
    errs = [abs(fn(ohmic.refined(n), 1.0) - ref) for n in (1025, 2049, 4097)]
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_memory_kernel_closed_form(ohmic):
    t = np.linspace(0, 5, 11)
    exact = (1 / (2 * np.pi)) / (1 + 1j * t) ** 2
    assert np.max(np.abs(memory_kernel(ohmic, t) - exact)) < 5e-6
    k0 = memory_kernel(ohmic, 0.0)
    assert abs(k0.imag) < 1e-15 and k0.real > 0


def test_memory_kernel_conjugation(ohmic):
    t = 1.7
    rev = ohmic.grid.integrate(ohmic.values * np.exp(1j * ohmic.grid.nodes * t))
    assert rev == pytest.approx(np.conj(memory_kernel(ohmic, t)), abs=1e-15)


def test_fourier_series_matches_direct(ohmic, rng):
    h = rng.normal(size=ohmic.grid.n_points) + 1j * rng.normal(size=ohmic.grid.n_points)
    dt, n = 0.02, 300
    fast = fourier_series(ohmic.grid, h, dt, n)
    slow = fourier_direct(ohmic.grid, h, dt * np.arange(n))
    assert np.max(np.abs(fast - slow)) < 1e-10 * np.max(np.abs(slow))


def test_laplace_k(ohmic):
    assert laplace_k(SpectralModel.flat(0.0, 10.0), 1.0) == 0
    assert laplace_k(ohmic, 1.0) == pytest.approx(KHAT_1, abs=2e-6)
    assert laplace_k(ohmic.refined(16385), 1.0) == pytest.approx(KHAT_1, abs=2e-8)
    edge = laplace_k(ohmic, -1j, plus0=True)
    assert edge == pytest.approx(gamma(ohmic, 1.0) / 2 + 1j * lamb_shift(ohmic, 1.0), abs=1e-14)
    with pytest.raises(ValueError):
        laplace_k(ohmic, -1j)


def test_laplace_k_plateau():
    # the node spacing (~1e-5) must resolve the smallest eps
    model = SpectralModel.ohmic(n_points=2**21 + 1)
    target = gamma(model, 1.0) / 2 + 1j * lamb_shift(model, 1.0)
    errs = [abs(laplace_k(model, -1j + eps) - target) for eps in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 3e-5


def test_laplace_l(ohmic):
    assert laplace_l(SpectralModel.flat(0.0, 10.0), 1.0) == 0
    assert laplace_l(ohmic, 1.0) == pytest.approx(LHAT_1, abs=1e-9)
    w = 1.0
    val = 1j * laplace_l(ohmic, -1j * w, plus0=True)
    ref = gamma(ohmic, w) / 2 + 1j * (lamb_shift(ohmic, w) - delta_bar(ohmic, w))
    assert val == pytest.approx(ref, abs=1e-13)
    with pytest.raises(ValueError):
        laplace_l(ohmic, -1j * w)


def test_principal_value_endpoint_rules():
    g = FrequencyGrid(4.0, 401)
    h = np.sin(np.pi * g.nodes / 4.0)  # vanishes at both ends
    assert np.isfinite(principal_value(g, h, 0.0))
    with pytest.raises(ValueError):
        principal_value(g, np.ones(g.n_points), 0.0)


def test_laplace_transform_rejects_axis_without_flag(ohmic):
    with pytest.raises(ValueError):
        laplace_transform(ohmic.grid, ohmic.values, -2j)


def test_serialization_roundtrip(ohmic):
    back = SpectralModel.from_dict(ohmic.to_dict())
    assert back.kind == "ohmic" and np.array_equal(back.values, ohmic.values)
    g = FrequencyGrid(5.0, 64)
    tab = SpectralModel("tabulated", {"values": np.linspace(0, 1, 64)}, g)
    assert np.array_equal(SpectralModel.from_dict(tab.to_dict()).values, tab.values)


def test_model_validation():
    with pytest.raises(ValueError):
        SpectralModel("sub-ohmic", {}, FrequencyGrid(5.0, 64))
    with pytest.raises(ValueError):
        SpectralModel("tabulated", {"values": -np.ones(64)}, FrequencyGrid(5.0, 64))
