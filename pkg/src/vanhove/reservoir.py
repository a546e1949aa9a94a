"""Reservoir reference state, its finite-rank perturbation, and two-point functions.

All reservoir data are sampled on the nodes of a :class:`FrequencyGrid`.  The
two-point function of the initial reservoir state is

    <b_w'^dag b_w> = N(w) delta(w - w') + Ntilde(w, w'),
    Ntilde(w, w') = sum_k c_k u_k(w) u_k(w')^*,

and a delta function on the grid acts as the identity under the trapezoid
inner product ``<f, g> = sum_k w_k f_k^* g_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matmul_toeplitz

from .spectral import FrequencyGrid, fourier_direct, fourier_series


def bose(W):
    """N = 1 / (exp(W) - 1); W = inf gives 0."""
    W = np.asarray(W, dtype=float)
    if np.any(W <= 0):
        raise ValueError("mixing weight W must be positive (occupation diverges)")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(W)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MixingState:
    """Reference state with occupation N(w) = 1/(exp(W(w)) - 1).

    ``beta`` selects the linear family W = beta*w (``beta = inf`` is the
    vacuum); otherwise ``W`` holds tabulated node values.  W(0) = 0 of the
    linear family is not representable, so the zero-frequency node is given
    occupation 0; it carries no spectral weight for couplings or probes
    vanishing at w = 0.
    """

    grid: FrequencyGrid
    beta: float | None = None
    W: np.ndarray | None = None
    N: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = self.grid.nodes
        if self.beta is not None:
            if not self.beta > 0:
                raise ValueError("reservoir: beta must be positive (W = beta*omega > 0)")
            occ = np.zeros(nodes.size)
            if np.isfinite(self.beta):
                occ[1:] = bose(self.beta * nodes[1:])
        else:
            if self.W is None:
                raise ValueError("reservoir: give either beta or tabulated W")
            W = np.asarray(self.W, dtype=float)
            if W.shape != nodes.shape:
                raise ValueError("reservoir: tabulated W must have one value per node")
            if np.any(W[1:] <= 0) or W[0] < 0:
                raise ValueError("reservoir: W must be positive for omega > 0")
            occ = np.zeros(nodes.size)
            occ[1:] = bose(W[1:])
            if W[0] > 0:
                occ[0] = bose(W[0])
        occ.setflags(write=False)
        object.__setattr__(self, "N", occ)

    @classmethod
    def thermal(cls, grid, beta):
        return cls(grid, beta=beta)

    @classmethod
    def vacuum(cls, grid):
        return cls(grid, beta=np.inf)

    def weight(self, omega):
        if self.beta is not None:
            return self.beta * np.asarray(omega, dtype=float)
        return np.interp(omega, self.grid.nodes, self.W)


def occupation(state: MixingState, omega):
    """N(w) = 1/(exp(W(w)) - 1); raises for W <= 0."""
    state.grid.check_domain(omega)
    return bose(state.weight(omega))


@dataclass(frozen=True)
class GridFunction:
    """Complex function sampled on the nodes of a frequency grid."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError("grid function must have one value per node")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def gaussian(cls, grid, center, width, amplitude=1.0, normalized=False):
        """amplitude * exp(-(w - center)^2 / (4 width^2)); |f|^2 has standard deviation ``width``."""
        if not width > 0:
            raise ValueError("bump width must be positive")
        v = np.exp(-((grid.nodes - center) ** 2) / (4 * width**2)).astype(complex)
        if normalized:
            v /= np.sqrt(grid.integrate(np.abs(v) ** 2))
        return cls(grid, amplitude * v)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_points, complex))

    def norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))

    def inner(self, other) -> complex:
        """<self, other> = int self^* other."""
        return complex(self.grid.integrate(np.conj(self.values) * _values(other, self.grid)))

    def bandwidth(self) -> float:
        """Standard deviation of w under the weight |f(w)|^2."""
        return spectral_spread(self.grid, np.abs(self.values) ** 2)

    def __mul__(self, c):
        return type(self)(self.grid, self.values * c)

    __rmul__ = __mul__


class TestFunction(GridFunction):
    """Probe J_b for reservoir observables."""

    __test__ = False  # keep pytest from collecting this class


class CorrelationVector(GridFunction):
    """System-reservoir correlation parameter xi_w."""


def _values(f, grid=None):
    if isinstance(f, GridFunction):
        if grid is not None and f.grid != grid:
            raise ValueError("grid functions live on different frequency grids")
        return f.values
    v = np.asarray(f, dtype=complex)
    if grid is not None and v.shape != (grid.n_points,):
        raise ValueError("sampled function does not match the frequency grid")
    return v


def _pair(f, g):
    grid = f.grid if isinstance(f, GridFunction) else getattr(g, "grid", None)
    if grid is None:
        raise ValueError("at least one argument must carry its frequency grid")
    return grid, _values(f, grid), _values(g, grid)


@dataclass(frozen=True)
class Perturbation:
    """Finite-rank Ntilde = sum_k c_k u_k u_k^dag on the grid."""

    grid: FrequencyGrid
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), complex))

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        u = np.asarray(self.vectors, dtype=complex)
        if c.size == 0:
            u = np.zeros((0, self.grid.n_points), complex)
        u = u.reshape(c.size, -1) if u.size else u
        if u.shape != (c.size, self.grid.n_points):
            raise ValueError("perturbation vectors must be rank x n_points")
        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(c)):
            raise ValueError("perturbation must be finite")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "vectors", u)

    @classmethod
    def none(cls, grid):
        return cls(grid)

    @classmethod
    def gaussian_bumps(cls, grid, bumps):
        """``bumps``: iterable of (coefficient, center, width[, amplitude])."""
        coeffs, vecs = [], []
        for b in bumps:
            c, center, width, *rest = b
            amp = rest[0] if rest else 1.0
            coeffs.append(c)
            vecs.append(GridFunction.gaussian(grid, center, width, amp).values)
        return cls(grid, np.array(coeffs, float), np.array(vecs).reshape(len(coeffs), grid.n_points))

    @property
    def rank(self) -> int:
        return self.coeffs.size

    def apply(self, v) -> np.ndarray:
        """(Ntilde v)(w) = sum_k c_k u_k(w) <u_k, v>."""
        v = _values(v, self.grid)
        if not self.rank:
            return np.zeros_like(v)
        proj = (np.conj(self.vectors) * self.grid.weights) @ v
        return (self.coeffs * proj) @ self.vectors

    def check_positive(self, state: MixingState, tol=1e-10):
        """Raise unless diag(N) + Ntilde is positive semidefinite on the grid."""
        if state.grid != self.grid:
            raise ValueError("perturbation and mixing state use different grids")
        if np.all(self.coeffs >= 0):
            return
        sw = np.sqrt(self.grid.weights)
        u = self.vectors * sw
        # nodes outside the support of every u_k only contribute N >= 0
        keep = np.max(np.abs(u), axis=0) > 1e-14 * np.max(np.abs(u))
        ub = u[:, keep]
        mat = np.diag(state.N[keep]).astype(complex) + (ub.T * self.coeffs) @ np.conj(ub)
        low = np.linalg.eigvalsh(mat).min()
        if low < -tol * max(1.0, np.abs(mat).max()):
            raise ValueError(f"reservoir: two-point function not positive (eigenvalue {low:.3g})")


def two_point_apply(state: MixingState, pert: Perturbation, v) -> np.ndarray:
    """(N v)(w) for the full two-point function N = diag(N) + Ntilde."""
    v = _values(v, state.grid)
    return state.N * v + pert.apply(v)


def k_fg(f, g, t):
    """K_fg(t) = int f_w^* exp(-i w t) g_w dw."""
    grid, fv, gv = _pair(f, g)
    out = fourier_direct(grid, np.conj(fv) * gv, t)
    return out if np.ndim(out) else complex(out)


def phi0_fg(state: MixingState, f, g, t):
    """Phi0_fg(t) = int f_w^* (1 + N(w)) g_w exp(-i w t) dw, any real t."""
    grid, fv, gv = _pair(f, g)
    if grid != state.grid:
        raise ValueError("grid mismatch between state and functions")
    out = fourier_direct(grid, np.conj(fv) * (1 + state.N) * gv, t)
    return out if np.ndim(out) else complex(out)


def _phi(state, pert, f, g, t, tp, factor):
    grid, fv, gv = _pair(f, g)
    if grid != state.grid or grid != pert.grid:
        raise ValueError("grid mismatch between reservoir data and functions")
    diag = np.conj(fv) * (1 + factor * state.N) * gv
    val = fourier_direct(grid, diag, np.asarray(t, float) - np.asarray(tp, float))
    for c, u in zip(pert.coeffs, pert.vectors):
        kf = fourier_direct(grid, np.conj(fv) * u, t)
        kg = fourier_direct(grid, np.conj(gv) * u, tp)
        val = val + factor * c * kf * np.conj(kg)
    return val if np.ndim(val) else complex(val)


def phi_fg(state: MixingState, pert: Perturbation, f, g, t, tp):
    """Phi_fg(t, t') with kernel (1 + N)."""
    return _phi(state, pert, f, g, t, tp, 1.0)


def phi_beta_fg(state: MixingState, pert: Perturbation, f, g, t, tp):
    """Phi^beta_fg(t, t') with kernel (1 + 2N)."""
    return _phi(state, pert, f, g, t, tp, 2.0)


def spectral_spread(grid, weight) -> float:
    """Standard deviation of w under a non-negative weight on the grid nodes."""
    weight = np.asarray(weight, dtype=float)
    total = grid.integrate(weight)
    if not total > 0:
        raise ValueError("zero weight: bandwidth undefined")
    mean = grid.integrate(weight * grid.nodes) / total
    return float(np.sqrt(grid.integrate(weight * (grid.nodes - mean) ** 2) / total))


def factorization_spectrum(state, pert, xi, probe) -> np.ndarray:
    """Node values of Ktilde_{J(N xi)}(w) = 2 pi J_w^* (N xi)_w."""
    return 2 * np.pi * np.conj(_values(probe, state.grid)) * two_point_apply(state, pert, xi)


def mixing_spectrum(pert: Perturbation, probe):
    """Lags and values of the folded transform of the Ntilde part of Phi_JJ(t, t).

    Phi_JJ(t, t) - Phi0_JJ(0) = sum_k c_k |int q_k e^{-iwt}|^2 with q_k = J^* u_k,
    whose transform is the autocorrelation of q_k.
    """
    grid = pert.grid
    jv = _values(probe, grid)
    m = grid.n_points
    acc = np.zeros(2 * m - 1, complex)
    for c, u in zip(pert.coeffs, pert.vectors):
        q = np.conj(jv) * u
        acc += 2 * np.pi * c * grid.spacing * np.correlate(q, q, mode="full")
    lags = (np.arange(2 * m - 1) - (m - 1)) * grid.spacing
    return lags, acc


def correlation_timescale(probe, *, xi=None, state=None, pert=None, kind="factorization") -> float:
    """Predicted decay time 1/B, B the rms width of the relevant spectrum.

    The width is the standard deviation of w under the modulus of the
    transform, so a Gaussian spectrum of width B gives an envelope
    exp(-B^2 t^2 / 2) that has fallen to exp(-1/2) at the returned time.
    """
    if kind == "factorization":
        if xi is None or state is None:
            raise ValueError("factorization timescale needs xi and the mixing state")
        pert = pert if pert is not None else Perturbation.none(state.grid)
        spec = np.abs(factorization_spectrum(state, pert, xi, probe))
        if not np.any(spec > 0):
            raise ValueError("transform vanishes identically: timescale undefined")
        return 1.0 / spectral_spread(state.grid, spec)
    if kind == "mixing":
        if pert is None:
            raise ValueError("mixing timescale needs the perturbation")
        lags, spec = mixing_spectrum(pert, probe)
        spec = np.abs(spec)
        total = spec.sum()
        if not total > 0:
            raise ValueError("transform vanishes identically: timescale undefined")
        mean = (lags * spec).sum() / total
        return 1.0 / float(np.sqrt(((lags - mean) ** 2 * spec).sum() / total))
    raise ValueError(f"unknown timescale kind {kind!r}")


def fit_gaussian_timescale(t, envelope, floor=1e-3) -> float:
    """Least-squares T in envelope/envelope[0] = exp(-t^2 / (2 T^2)) over the part above ``floor``."""
    t = np.asarray(t, float)
    r = np.abs(np.asarray(envelope)) / abs(envelope[0])
    sel = (r > floor) & (t > 0)
    if sel.sum() < 2:
        raise ValueError("not enough samples above the floor to fit a timescale")
    x, y = t[sel] ** 2, np.log(r[sel])
    slope = np.dot(x, y) / np.dot(x, x)
    if slope >= 0:
        raise ValueError("envelope does not decay")
    return float(np.sqrt(-0.5 / slope))


@dataclass
class TwoTimeKernel:
    """Phi(t_m, t_l) on a uniform time grid: Toeplitz part plus low rank.

    Phi(t_m, t_l) = lag[m - l] + sum_k coef_k a_k[m] conj(b_k[l]), where
    ``lag`` is stored for non-negative (``pos``) and negative (``neg``) lags.
    """

    pos: np.ndarray
    neg: np.ndarray
    coef: np.ndarray
    a: np.ndarray  # (rank, n+1)
    b: np.ndarray

    def row(self, j: int) -> np.ndarray:
        """Phi(t_j, t_l) for l = 0..j."""
        out = self.pos[j::-1].copy()
        if self.coef.size:
            out += (self.coef * self.a[:, j]) @ np.conj(self.b[:, : j + 1])
        return out

    def at(self, m: int, l: int) -> complex:
        val = self.pos[m - l] if m >= l else self.neg[l - m]
        if self.coef.size:
            val += np.sum(self.coef * self.a[:, m] * np.conj(self.b[:, l]))
        return complex(val)

    def matvec(self, j: int, x: np.ndarray) -> np.ndarray:
        """y_m = sum_{l<=j} Phi(t_m, t_l) x_l for m = 0..j; ``x`` is (j+1,) or (j+1, k)."""
        y = matmul_toeplitz((self.pos[: j + 1], self.neg[: j + 1]), x)
        if self.coef.size:
            low = np.conj(self.b[:, : j + 1]) @ x
            y = y + self.a[:, : j + 1].T @ (self.coef[:, None] * low if low.ndim > 1 else self.coef * low)
        return y


def two_time_kernel(state, pert, f, g, dt, n, factor=1.0, scale=1.0) -> TwoTimeKernel:
    """Kernel scale * Phi_fg(t, t') with two-point weight (1 + factor*N) on t_j = j*dt, j <= n."""
    grid = state.grid
    fv, gv = _values(f, grid), _values(g, grid)
    n1 = n + 1
    diag = (1 + factor * state.N)
    pos = fourier_series(grid, np.conj(fv) * diag * gv, dt, n1)
    neg = np.conj(fourier_series(grid, np.conj(gv) * diag * fv, dt, n1))
    if pert.rank:
        a = fourier_series(grid, np.conj(fv)[None, :] * pert.vectors, dt, n1)
        b = fourier_series(grid, np.conj(gv)[None, :] * pert.vectors, dt, n1)
        coef = scale * factor * pert.coeffs
    else:
        a = b = np.zeros((0, n1), complex)
        coef = np.zeros(0)
    return TwoTimeKernel(scale * pos, scale * neg, coef, a, b)
