"""Form factors on a truncated frequency grid and the frequency integrals built from them.

Conventions
-----------
The coupling amplitude g_w is taken real and non-negative, so only |g_w|^2
needs to be stored.  Every integral over [0, inf) is truncated at
``omega_max`` and evaluated with the composite trapezoid rule on a uniform
grid whose first node is zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import CZT

KINDS = ("flat", "ohmic", "lorentzian", "tabulated")
_KIND_ALIASES = {"ohmic-exponential-cutoff": "ohmic"}


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid on [0, omega_max] with composite trapezoid weights."""

    omega_max: float
    n_points: int = 2048

    def __post_init__(self):
        if not (np.isfinite(self.omega_max) and self.omega_max > 0):
            raise ValueError(f"omega_max must be positive and finite, got {self.omega_max}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.omega_max, self.n_points)

    @property
    def spacing(self) -> float:
        return self.omega_max / (self.n_points - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def integrate(self, values) -> complex:
        """Trapezoid integral of node-sampled values."""
        return np.dot(self.weights, values)

    def check_domain(self, omega, *, open_interval=False):
        omega = np.asarray(omega, dtype=float)
        lo_bad = omega <= 0 if open_interval else omega < 0
        hi_bad = omega >= self.omega_max if open_interval else omega > self.omega_max
        if np.any(lo_bad | hi_bad):
            span = "(0, omega_max)" if open_interval else "[0, omega_max]"
            raise ValueError(f"frequency {omega} outside {span} = {self.omega_max}")

    def to_dict(self) -> dict:
        return {"omega_max": self.omega_max, "n_points": self.n_points}


def _analytic_coupling(kind: str, params: dict, omega):
    """|g_w|^2 for the closed-form families."""
    omega = np.asarray(omega, dtype=float)
    eta = params.get("eta", 1.0)
    if kind == "flat":
        return np.full_like(omega, eta)
    if kind == "ohmic":
        wc = params.get("omega_c", 1.0)
        return eta / (2 * np.pi) * omega * np.exp(-omega / wc)
    if kind == "lorentzian":
        w0 = params.get("omega_0", 1.0)
        width = params.get("width", 0.1)
        return eta / (2 * np.pi) * width**2 / ((omega - w0) ** 2 + width**2)
    raise ValueError(f"unknown spectral kind {kind!r}")


@dataclass(frozen=True)
class SpectralModel:
    """Squared form factor |g_w|^2 sampled on a frequency grid.

    Parameters
    ----------
    kind : str
        ``flat`` (|g|^2 = eta), ``ohmic`` (eta/2pi * w * exp(-w/omega_c)),
        ``lorentzian`` (eta/2pi * width^2 / ((w - omega_0)^2 + width^2)) or
        ``tabulated`` (``params['values']`` given on the grid nodes).
    params : dict
        Family parameters.
    grid : FrequencyGrid
    """

    kind: str
    params: dict
    grid: FrequencyGrid
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown spectral kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind == "tabulated":
            vals = np.asarray(self.params.get("values"), dtype=float)
            if vals.shape != (self.grid.n_points,):
                raise ValueError("tabulated values must have one entry per grid node")
        else:
            for key in ("eta", "omega_c", "width"):
                if key in self.params and not self.params[key] >= 0:
                    raise ValueError(f"spectral parameter {key} must be non-negative")
            vals = _analytic_coupling(kind, self.params, self.grid.nodes)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("|g|^2 must be finite and non-negative at every node")
        vals = np.array(vals, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # convenience constructors
    @classmethod
    def ohmic(cls, eta=1.0, omega_c=1.0, omega_max=None, n_points=2048):
        omega_max = 20.0 * omega_c if omega_max is None else omega_max
        return cls("ohmic", {"eta": eta, "omega_c": omega_c}, FrequencyGrid(omega_max, n_points))

    @classmethod
    def flat(cls, eta, omega_max, n_points=2048):
        return cls("flat", {"eta": eta}, FrequencyGrid(omega_max, n_points))

    @property
    def amplitude(self) -> np.ndarray:
        """Real non-negative g_w on the nodes."""
        return np.sqrt(self.values)

    def coupling(self, omega):
        """|g_w|^2 at arbitrary frequencies (linear interpolation if tabulated)."""
        if self.kind == "tabulated":
            return np.interp(omega, self.grid.nodes, self.values)
        return _analytic_coupling(self.kind, self.params, omega)

    def refined(self, n_points: int) -> "SpectralModel":
        """Same model on a grid with a different number of nodes."""
        if self.kind == "tabulated":
            new = FrequencyGrid(self.grid.omega_max, n_points)
            vals = np.interp(new.nodes, self.grid.nodes, self.values)
            return SpectralModel("tabulated", {"values": vals}, new)
        return SpectralModel(self.kind, dict(self.params), FrequencyGrid(self.grid.omega_max, n_points))

    def to_dict(self) -> dict:
        params = {k: (list(map(float, v)) if k == "values" else v) for k, v in self.params.items()}
        return {"kind": self.kind, "params": params, **self.grid.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralModel":
        d = dict(d)
        grid = FrequencyGrid(float(d.pop("omega_max")), int(d.pop("n_points", 2048)))
        params = d.pop("params", {})
        return cls(d.pop("kind"), dict(params), grid)


def gamma(model: SpectralModel, omega):
    """Decay rate Gamma(w) = 2 pi |g_w|^2."""
    model.grid.check_domain(omega)
    return 2 * np.pi * model.coupling(omega)


def principal_value(grid: FrequencyGrid, h, omega, h_omega=None):
    """P int_0^omega_max h(w') / (omega - w') dw' for node-sampled h.

    Singularity subtraction: the difference quotient (h(w') - h(omega))/(omega - w')
    is integrated with the trapezoid rule and the remainder
    h(omega) * ln(omega / (omega_max - omega)) is added analytically.  h(omega)
    is linearly interpolated unless the exact value ``h_omega`` is supplied,
    so omega need not sit on a node.  At an endpoint the log term diverges and
    is only accepted when h vanishes there.
    """
    h = np.asarray(h)
    nodes, wts = grid.nodes, grid.weights
    omega = float(omega)
    if omega < 0 or omega > grid.omega_max:
        raise ValueError(f"frequency {omega} outside [0, {grid.omega_max}]")
    if h_omega is not None:
        h_at = h_omega
    else:
        h_at = np.interp(omega, nodes, h.real) + (1j * np.interp(omega, nodes, h.imag) if np.iscomplexobj(h) else 0)
    diff = omega - nodes
    on_node = np.abs(diff) < 1e-12 * grid.omega_max
    safe = np.where(on_node, 1.0, diff)
    integrand = (h - h_at) / safe
    if np.any(on_node):
        # limit of the difference quotient is -h'(omega)
        k = int(np.flatnonzero(on_node)[0])
        integrand[k] = -np.gradient(h, nodes)[k]
    total = np.dot(wts, integrand)
    if on_node[0] or on_node[-1] or omega in (0.0, grid.omega_max):
        if abs(h_at) > 0:
            raise ValueError("principal value undefined at a grid endpoint")
        return total
    return total + h_at * np.log(omega / (grid.omega_max - omega))


def lamb_shift(model: SpectralModel, omega: float) -> float:
    """Delta(w) = P int (dw'/2pi) Gamma(w') / (w - w')."""
    model.grid.check_domain(omega, open_interval=True)
    return float(np.real(principal_value(model.grid, model.values, omega, model.coupling(omega))))


def delta_bar(model: SpectralModel, omega: float) -> float:
    """Counter-rotating shift int (dw'/2pi) Gamma(w') / (w + w')."""
    if not omega > 0:
        raise ValueError(f"delta_bar needs omega > 0, got {omega}")
    return float(model.grid.integrate(model.values / (omega + model.grid.nodes)))


def fourier_series(grid: FrequencyGrid, h, dt: float, n: int) -> np.ndarray:
    """sum_k w_k h_k exp(-i w_k t_j) for t_j = j*dt, j = 0..n-1.

    Uses a chirp-z transform, exact up to rounding for the uniform grid.
    ``h`` may carry leading batch axes.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != grid.n_points:
        raise ValueError("sampled function does not match the frequency grid")
    step = np.exp(-1j * grid.spacing * dt)
    return CZT(grid.n_points, n, w=step, a=1.0)(h * grid.weights)


def fourier_direct(grid: FrequencyGrid, h, t) -> np.ndarray:
    """Direct-sum counterpart of :func:`fourier_series` at arbitrary times."""
    t = np.asarray(t, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(t, grid.nodes))
    return phase @ (grid.weights * np.asarray(h))


def memory_kernel(model: SpectralModel, t):
    """K(t) = int |g_w|^2 exp(-i w t) dw by grid quadrature."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("memory kernel is defined for t >= 0")
    out = fourier_direct(model.grid, model.values, t)
    return out if out.ndim else complex(out)


def laplace_transform(grid: FrequencyGrid, h, s: complex, plus0: bool = False) -> complex:
    """int h(w) / (s + i w) dw for node-sampled h.

    With ``plus0`` and purely imaginary ``s`` the boundary value from the right
    half plane is returned in closed form:
    s = -i w0 + 0+  ->  pi h(w0) + i P int h(w) / (w0 - w) dw.
    """
    s = complex(s)
    nodes = grid.nodes
    if s.real > 0:
        return complex(grid.integrate(np.asarray(h) / (s + 1j * nodes)))
    if s.real < 0:
        raise ValueError(f"Laplace transform needs Re(s) >= 0, got {s}")
    w0 = -s.imag
    if w0 <= 0:
        # s = +i|w0|: the denominator i(|w0| + w) only vanishes at w = w0 = 0
        if w0 == 0 and not plus0:
            raise ValueError("s = 0 lies on the spectrum; pass plus0=True")
        if w0 == 0:
            return complex(np.pi * np.asarray(h)[0] - 1j * principal_value(grid, h, 0.0))
        return complex(grid.integrate(np.asarray(h) / (1j * (nodes - w0))))
    if not plus0:
        raise ValueError(f"s = {s} lies on the negative imaginary axis; pass plus0=True")
    if w0 > grid.omega_max:
        return complex(grid.integrate(np.asarray(h) / (1j * (nodes - w0))))
    hr = np.asarray(h)
    h_at = np.interp(w0, nodes, hr.real) + (1j * np.interp(w0, nodes, hr.imag) if np.iscomplexobj(hr) else 0)
    return complex(np.pi * h_at + 1j * principal_value(grid, hr, w0))


def laplace_k(model: SpectralModel, s: complex, plus0: bool = False) -> complex:
    """K_hat(s) = int |g_w|^2 / (s + i w) dw.

    ``plus0=True`` at s = -i w returns Gamma(w)/2 + i Delta(w).
    """
    s = complex(s)
    if plus0 and s.real == 0 and 0 < -s.imag < model.grid.omega_max:
        w = -s.imag
        return complex(0.5 * gamma(model, w) + 1j * lamb_shift(model, w))
    return laplace_transform(model.grid, model.values, s, plus0)


def laplace_l(model: SpectralModel, s: complex, plus0: bool = False) -> complex:
    """L_hat(s) = -int |g_w|^2 2w / (s^2 + w^2) dw.

    ``plus0=True`` at s = -/+ i w returns Delta - Delta_bar -/+ i Gamma/2, so that
    +/- i L_hat(-/+ i w + 0+) = Gamma/2 +/- i (Delta - Delta_bar).
    """
    s = complex(s)
    nodes = model.grid.nodes
    if s.real == 0 and s.imag != 0 and abs(s.imag) <= model.grid.omega_max:
        if not plus0:
            raise ValueError(f"s = {s} collides with a pole of L_hat; pass plus0=True")
        w = abs(s.imag)
        val = lamb_shift(model, w) - delta_bar(model, w) - 0.5j * gamma(model, w)
        return complex(val if s.imag < 0 else np.conj(val))
    if s == 0:
        raise ValueError("L_hat is singular at s = 0 on this grid")
    return complex(-model.grid.integrate(model.values * 2 * nodes / (s * s + nodes**2)))
