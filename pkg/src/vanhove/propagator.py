"""Dressed system propagators from the memory-kernel Volterra equations.

Rotating-wave model::

    dG/dt = -i w_S G - lam^2 (K * G),              G(0) = 1

Counter-rotating model, through the real auxiliary amplitude chi::

    chi'' + w_S^2 chi + 2 lam^2 w_S (L * chi) = 0,  chi(0) = 0, chi'(0) = 1
    F = chi' - i w_S chi,   Fbar = -i (L * chi),    L(t) = -2 int |g|^2 sin(w t)

Both are stepped with the trapezoid rule applied to the equation in the frame
co-rotating at w_S, so the free phase is exact and only the memory term is
discretised.  The full memory sum is kept (O(n^2)).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .spectral import SpectralModel, fourier_series


class StabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    n_steps: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def fitting(cls, t_max: float, dt_max: float, multiple: int = 1) -> "TimeGrid":
        """Smallest grid on [0, t_max] with dt <= dt_max and n_steps divisible by ``multiple``."""
        n = int(np.ceil(t_max / dt_max / multiple - 1e-9)) * multiple
        return cls(t_max, max(n, multiple))

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_steps + 1)

    def index(self, t: float) -> int:
        """Grid index of ``t``; refuses times that are not grid points."""
        x = t / self.dt
        j = int(round(x))
        if abs(x - j) > 1e-7 * max(1.0, abs(x)) or j < 0 or j > self.n_steps:
            raise ValueError(f"t = {t} is not a point of the time grid (dt = {self.dt}); "
                             "values are only available on grid points")
        return j

    def check_resolution(self, omega_max: float):
        if self.dt * omega_max > 0.5 + 1e-12:
            raise ValueError(f"dt*omega_max = {self.dt * omega_max:.3g} exceeds 0.5; "
                             "use more time steps")


@dataclass
class PropagatorTable:
    """Propagator samples on a time grid.

    ``values`` holds G (RWA) or F (CR); ``fbar`` and ``chi`` are only set for CR.
    """

    variant: str
    lam: float
    omega_s: float
    grid: TimeGrid
    values: np.ndarray
    fbar: np.ndarray | None = None
    chi: np.ndarray | None = None

    @property
    def times(self):
        return self.grid.times

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t", "re", "im"]
            if self.variant == "CR":
                head += ["re_fbar", "im_fbar"]
            w.writerow(head)
            for k, t in enumerate(self.times):
                row = [f"{t:.10g}", f"{self.values[k].real:.16g}", f"{self.values[k].imag:.16g}"]
                if self.variant == "CR":
                    row += [f"{self.fbar[k].real:.16g}", f"{self.fbar[k].imag:.16g}"]
                w.writerow(row)


def convolve(a, b, dt: float) -> np.ndarray:
    """Trapezoid approximation of (a*b)(t_j) = int_0^t_j a(t_j - s) b(s) ds on a uniform grid."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("convolve needs two samples on the same time grid")
    full = fftconvolve(a, b)[: a.size]
    return dt * (full - 0.5 * (a * b[0] + a[0] * b))


def kernel_samples(model: SpectralModel, grid: TimeGrid) -> np.ndarray:
    """Memory kernel K(t_j) on the time grid."""
    return fourier_series(model.grid, model.values, grid.dt, grid.n_steps + 1)


def _check(model, lam, grid):
    if lam < 0:
        raise ValueError("coupling lambda must be non-negative")
    grid.check_resolution(model.grid.omega_max)


def solve_g(model: SpectralModel, lam: float, omega_s: float, grid: TimeGrid) -> PropagatorTable:
    """Rotating-wave propagator G(t)."""
    _check(model, lam, grid)
    n, dt = grid.n_steps, grid.dt
    t = grid.times
    # kernel in the co-rotating frame, Gt = exp(i w_S t) G
    ker = kernel_samples(model, grid) * np.exp(1j * omega_s * t)
    c = lam * lam
    gt = np.empty(n + 1, dtype=complex)
    gt[0] = 1.0
    rate = np.empty(n + 1, dtype=complex)  # d Gt / dt
    rate[0] = 0.0
    rev = ker[::-1].copy()  # rev[n - m] = ker[m]
    denom = 1.0 + 0.25 * c * dt * dt * ker[0]
    for j in range(n):
        k = j + 1
        # memory sum at t_k without the implicit endpoint term
        s = 0.5 * ker[k] * gt[0]
        if j:
            s += np.dot(rev[n - k + 1 : n], gt[1:k])
        s *= dt
        gt[k] = (gt[j] + 0.5 * dt * rate[j] - 0.5 * dt * c * s) / denom
        rate[k] = -c * (s + 0.5 * dt * ker[0] * gt[k])
        if abs(gt[k]) > 1 + 1e-3:
            raise StabilityError(f"|G| = {abs(gt[k]):.4f} > 1 at t = {t[k]:.4g}; reduce dt")
    return PropagatorTable("RWA", lam, omega_s, grid, gt * np.exp(-1j * omega_s * t))


def solve_f_fbar(model: SpectralModel, lam: float, omega_s: float, grid: TimeGrid) -> PropagatorTable:
    """Counter-rotating propagators F(t), Fbar(t) and the auxiliary chi(t).

    Writing chi = -Im F / w_S turns the second-order equation into
    dF/dt = -i w_S F + 2 lam^2 (L * Im F), F(0) = 1, which is what is stepped.
    Since L(0) = 0 the trapezoid memory sum at t_k does not involve F(t_k),
    so each step is explicit.
    """
    _check(model, lam, grid)
    if not omega_s > 0:
        raise ValueError("counter-rotating model needs omega_S > 0")
    n, dt = grid.n_steps, grid.dt
    t = grid.times
    lker = 2.0 * kernel_samples(model, grid).imag  # L(t) = 2 Im K(t)
    lker[0] = 0.0
    c = lam * lam
    phase = np.exp(1j * omega_s * t)
    ft = np.empty(n + 1, dtype=complex)  # exp(i w_S t) F
    ft[0] = 1.0
    im_f = np.empty(n + 1)
    im_f[0] = 0.0
    rate = np.empty(n + 1, dtype=complex)
    rate[0] = 0.0
    rev = lker[::-1].copy()
    for j in range(n):
        k = j + 1
        s = 0.5 * lker[k] * im_f[0]
        if j:
            s += np.dot(rev[n - k + 1 : n], im_f[1:k])
        s *= dt
        rate[k] = 2.0 * c * phase[k] * s
        ft[k] = ft[j] + 0.5 * dt * (rate[j] + rate[k])
        im_f[k] = (ft[k] / phase[k]).imag
        if abs(ft[k]) > 1e3:
            raise StabilityError(f"|F| = {abs(ft[k]):.3g} at t = {t[k]:.4g}: the counter-rotating "
                                 "dynamics is unstable at this coupling, or dt is too coarse")
    f = ft / phase
    chi = -f.imag / omega_s
    fbar = -1j * convolve(lker, chi, dt)
    return PropagatorTable("CR", lam, omega_s, grid, f, fbar=fbar, chi=chi)


def solve(model, lam, omega_s, grid, variant="RWA") -> PropagatorTable:
    if variant == "RWA":
        return solve_g(model, lam, omega_s, grid)
    if variant == "CR":
        return solve_f_fbar(model, lam, omega_s, grid)
    raise ValueError(f"unknown model variant {variant!r}")
