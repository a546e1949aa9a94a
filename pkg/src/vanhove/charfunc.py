"""Exact characteristic functional of system plus reservoir for both models.

The functional is anti-normally ordered,

    G[J; t] = tr{ exp(J^dag c(t)) exp(-c(t)^dag J) rho_0 },

with c = (a, b_w) and J = (J_a, J_b).  Reservoir probes are expanded in a
fixed basis, J_b = sum_i c_i P_i, so the functional becomes a Gaussian in the
finite vector v = (J_a, c_1, ..., c_p):

    ln G = -v^dag A v - v^dag Abar v^* - v^T Abar^* v
           - (1 + n0) |x|^2 + x^* alpha - alpha^* x,
    x = sum_mu eta_mu v_mu + etabar_mu v_mu^*.

In terms of the usual component functions, A[0, 0] = A_aa,
A[i, 0] = P_i^dag A_ba, h_a = conj(eta[0]), P_i^dag h_b = conj(eta[i]),
hbar_a = etabar[0] and P_i^dag hbar_b = etabar[i].

Construction.  With c(t) = P c + Q c^dag and y = P^dag J - Q^T J^*,

    ln G = -J^dag J / 2 + |y_a|^2 / 2 - y_b^dag (1/2 + N) y_b + ln G_S(y_a + xi^dag N y_b).

For the rotating-wave model P is unitary and Q = 0, which reduces the
reservoir term to -y_b^dag (1 + N) y_b.  Every y_b is a combination of
reservoir vectors of the form e^{iwt} p_w + g_w (f * e^{iw.})(t), so all
quadratic forms are Gram matrices of such vectors under the two-point kernel;
these are evaluated with trapezoid weights on the propagator time grid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .propagator import PropagatorTable, convolve
from .reservoir import (GridFunction, MixingState, Perturbation, _values, two_point_apply,
                        two_time_kernel)
from .spectral import SpectralModel, fourier_series


@dataclass(frozen=True)
class SystemInitState:
    """Displaced thermal state: G_S(x) = exp(-(1 + n0)|x|^2 + x^* alpha - alpha^* x)."""

    alpha: complex = 0.0
    n0: float = 0.0

    def __post_init__(self):
        if not self.n0 >= 0:
            raise ValueError("system: thermal occupancy n0 must be >= 0")
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "n0", float(self.n0))

    def log_gs(self, x, xbar=None):
        xbar = np.conj(x) if xbar is None else xbar
        return -(1 + self.n0) * x * xbar + xbar * self.alpha - np.conj(self.alpha) * x


@dataclass
class ComponentSet:
    """Gaussian data of the functional at one time (see module docstring)."""

    t: float
    variant: str
    A: np.ndarray
    Abar: np.ndarray
    eta: np.ndarray
    etabar: np.ndarray
    probes: tuple = field(default=(), repr=False)

    @property
    def n_probes(self) -> int:
        return self.A.shape[0] - 1

    @property
    def A_aa(self) -> float:
        return float(self.A[0, 0].real)

    @property
    def h_a(self) -> complex:
        return complex(np.conj(self.eta[0]))

    @property
    def Abar_aa(self) -> complex:
        return complex(self.Abar[0, 0])

    @property
    def hbar_a(self) -> complex:
        return complex(self.etabar[0])

    def A_ba(self, i: int) -> complex:
        return complex(self.A[i + 1, 0])

    def A_ab(self, i: int) -> complex:
        return complex(self.A[0, i + 1])

    def A_bb(self, i: int, j: int | None = None) -> complex:
        j = i if j is None else j
        return complex(self.A[i + 1, j + 1])

    def Abar_ba(self, i: int) -> complex:
        return complex(self.Abar[i + 1, 0])

    def Abar_bb(self, i: int, j: int | None = None) -> complex:
        j = i if j is None else j
        return complex(self.Abar[i + 1, j + 1])

    def h_b(self, i: int) -> complex:
        return complex(np.conj(self.eta[i + 1]))

    def hbar_b(self, i: int) -> complex:
        return complex(self.etabar[i + 1])

    def rotated(self, phase: complex) -> "ComponentSet":
        """Functional with J_a replaced by J_a * phase (|phase| = 1)."""
        d = np.ones(self.A.shape[0], complex)
        d[0] = phase
        return ComponentSet(self.t, self.variant,
                            np.conj(d)[:, None] * self.A * d[None, :],
                            np.conj(d)[:, None] * self.Abar * np.conj(d)[None, :],
                            self.eta * d, self.etabar * np.conj(d), self.probes)

    def to_json(self) -> str:
        def cx(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}
        return json.dumps({"t": self.t, "variant": self.variant, "A": cx(self.A),
                           "Abar": cx(self.Abar), "eta": cx(self.eta), "etabar": cx(self.etabar)})


def _probe_values(probes, grid):
    return [np.asarray(_values(p, grid)) for p in probes]


def initial_charfunc(sys: SystemInitState, state: MixingState, pert: Perturbation, xi,
                     j_a: complex, j_b) -> complex:
    """exp(-J_b^dag (1 + N) J_b) G_S(J_a + xi^dag N J_b) by grid quadrature."""
    grid = state.grid
    jb = _values(j_b, grid)
    xiv = _values(xi, grid)
    njb = two_point_apply(state, pert, jb)
    quad = grid.integrate(np.conj(jb) * (jb + njb))
    x = j_a + grid.integrate(np.conj(xiv) * njb)
    return complex(np.exp(-quad + sys.log_gs(x)))


def check_correlated_state(sys: SystemInitState, state: MixingState, pert: Perturbation, xi, tol=1e-12):
    """Positivity of the correlated initial state without forming its covariance.

    The reservoir block of the second moments is Nd + (1+n0) v v^dag with
    v = Nd xi and Nd = N + Ntilde; its Schur complement against the system
    entry n0 is Nd - (1+n0)/n0 v v^dag, which is positive exactly when
    xi^dag Nd xi <= n0 / (1 + n0).
    """
    pert.check_positive(state)
    grid = state.grid
    xiv = _values(xi, grid)
    q = float(grid.integrate(np.conj(xiv) * two_point_apply(state, pert, xiv)).real)
    bound = sys.n0 / (1 + sys.n0)
    if q > bound + tol:
        raise ValueError(f"correlated initial state not positive: xi^dag N xi = {q:.4g} "
                         f"exceeds n0/(1+n0) = {bound:.4g}")
    return q


def eval_charfunc(cs: ComponentSet, sys: SystemInitState, j_a: complex, coeffs=None,
                  j_a_bar=None, coeffs_bar=None) -> complex:
    """Evaluate the functional at J_a and J_b = sum_i coeffs[i] * probes[i].

    ``j_a_bar`` and ``coeffs_bar`` stand for the conjugate variables and
    default to the conjugates; passing them separately gives the analytic
    continuation in which J and J^* are independent (Wirtinger calculus).
    """
    p = cs.n_probes
    c = np.zeros(p, complex) if coeffs is None else np.asarray(coeffs, complex).reshape(p)
    v = np.concatenate([[j_a], c])
    if j_a_bar is None and coeffs_bar is None:
        vb = np.conj(v)
    else:
        ja_b = np.conj(j_a) if j_a_bar is None else j_a_bar
        cb = np.conj(c) if coeffs_bar is None else np.asarray(coeffs_bar, complex).reshape(p)
        vb = np.concatenate([[ja_b], cb])
    x = cs.eta @ v + cs.etabar @ vb
    xb = np.conj(cs.eta) @ vb + np.conj(cs.etabar) @ v
    lng = -(vb @ cs.A @ v) - (vb @ cs.Abar @ vb) - (v @ np.conj(cs.Abar) @ v)
    return complex(np.exp(lng + sys.log_gs(x, xb)))


class ComponentEngine:
    """Evaluates ComponentSets on the grid of one propagator run.

    Time series and two-time kernels are built once; each evaluation time then
    costs a few Toeplitz products of its length.
    """

    def __init__(self, model: SpectralModel, state: MixingState, pert: Perturbation, xi,
                 prop: PropagatorTable, probes=()):
        grid = model.grid
        if state.grid != grid or pert.grid != grid:
            raise ValueError("spectral model and reservoir data use different frequency grids")
        prop.grid.check_resolution(grid.omega_max)
        self.model, self.state, self.pert, self.prop = model, state, pert, prop
        self.variant = prop.variant
        self.lam = prop.lam
        self.probes = tuple(probes)
        self.tgrid = prop.grid
        n1 = self.tgrid.n_steps + 1
        dt = self.tgrid.dt
        g = model.amplitude.astype(complex)
        nxi = two_point_apply(state, pert, xi)
        pv = _probe_values(self.probes, grid)
        self._pv = pv
        cr = self.variant == "CR"
        factor, scale = (2.0, 0.5) if cr else (1.0, 1.0)
        self._factor, self._scale = factor, scale

        def series(h):
            return fourier_series(grid, h, dt, n1)

        self.k_gn = series(g * nxi)  # K_{g(N xi)}(t), g real
        self.k_pn = [series(np.conj(p) * nxi) for p in pv]
        self.k_pg = [series(np.conj(p) * g) for p in pv]
        self.ker_gg = two_time_kernel(state, pert, g, g, dt, n1 - 1, factor, scale)
        self.ker_pg = [two_time_kernel(state, pert, p, g, dt, n1 - 1, factor, scale) for p in pv]
        # equal-time probe-probe part: constant diagonal piece plus low rank
        diag = 1 + factor * state.N
        self._pp0 = np.array([[scale * grid.integrate(np.conj(p) * diag * q) for q in pv] for p in pv])
        self._k_pu = [series(np.conj(p)[None, :] * pert.vectors) if pert.rank else None for p in pv]

        lam = self.lam
        conv = lambda a, b: convolve(a, b, dt)  # noqa: E731
        self.basis = []  # (probe index or None, g-part time series or None)
        self.bar_basis = []
        if not cr:
            G = prop.values
            self.basis.append((None, lam * np.conj(G)))
            kg_g = [conv(k, G) for k in self.k_pg]
            for i, k in enumerate(kg_g):
                self.basis.append((i, -lam * lam * np.conj(k)))
            self._a = [np.conj(G)] + [-lam * np.conj(k) for k in kg_g]
            self._abar = None
        else:
            F, Fb = prop.values, prop.fbar
            imf = F.imag.astype(complex)
            self.basis.append((None, lam * np.conj(F)))
            self.bar_basis.append((None, lam * F))
            for i, k in enumerate(self.k_pg):
                self.basis.append((i, 2j * lam * lam * conv(np.conj(k), imf)))
                self.bar_basis.append((None, -2j * lam * lam * conv(k, imf)))
            self._a = [np.conj(F + lam * lam * Fb)] + [-lam * np.conj(conv(k, F)) for k in self.k_pg]
            self._abar = [-lam * lam * Fb] + [lam * conv(k, np.conj(F)) for k in self.k_pg]

    # -- pieces --------------------------------------------------------
    def _weights(self, j):
        w = np.full(j + 1, self.tgrid.dt)
        w[0] = w[-1] = 0.5 * self.tgrid.dt
        if j == 0:
            w[:] = 0.0
        return w

    def _pp(self, j):
        p = len(self._pv)
        out = self._pp0.copy()
        if self.pert.rank and p:
            kj = np.array([k[:, j] for k in self._k_pu])  # (p, rank)
            out = out + self._scale * self._factor * (kj * self.pert.coeffs) @ np.conj(kj).T
        return out

    def _gram(self, j, vecs):
        """Gram matrix <X_mu, kernel X_nu> and overlaps <N xi, X_mu> at t_j."""
        w = self._weights(j)
        nb = len(vecs)
        gmat = np.zeros((nb, nb), complex)
        fcols = np.zeros((j + 1, nb), complex)
        has_f = np.zeros(nb, bool)
        for m, (_, f) in enumerate(vecs):
            if f is not None:
                fcols[:, m] = w * f[j::-1]
                has_f[m] = True
        pp = self._pp(j)
        rows = {}
        for m, (pi, _) in enumerate(vecs):
            if pi is not None and pi not in rows:
                rows[pi] = self.ker_pg[pi].row(j)
        if j > 0 and has_f.any():
            phi_f = self.ker_gg.matvec(j, fcols)
            gmat += np.conj(fcols).T @ phi_f
        for m, (pm, _) in enumerate(vecs):
            for n, (pn, _) in enumerate(vecs):
                val = 0.0
                if pm is not None and pn is not None:
                    val += pp[pm, pn]
                if pm is not None and has_f[n]:
                    val += rows[pm] @ fcols[:, n]
                if pn is not None and has_f[m]:
                    val += np.conj(rows[pn] @ fcols[:, m])
                gmat[m, n] += val
        ov = np.zeros(nb, complex)
        for m, (pm, _) in enumerate(vecs):
            if pm is not None:
                ov[m] += np.conj(self.k_pn[pm][j])
            if has_f[m]:
                ov[m] += fcols[:, m] @ np.conj(self.k_gn[: j + 1])
        return gmat, ov

    def at_index(self, j: int) -> ComponentSet:
        t = j * self.tgrid.dt
        nv = 1 + len(self._pv)
        a = np.array([x[j] for x in self._a])
        if self.variant == "RWA":
            gmat, ov = self._gram(j, self.basis)
            A = 0.5 * (gmat + np.conj(gmat).T)
            return ComponentSet(t, "RWA", A, np.zeros((nv, nv), complex), a + ov,
                                np.zeros(nv, complex), self.probes)
        abar = np.array([x[j] for x in self._abar])
        vecs = self.basis + self.bar_basis
        gmat, ov = self._gram(j, vecs)
        gyy, gbb, gyb = gmat[:nv, :nv], gmat[nv:, nv:], gmat[:nv, nv:]
        met = np.zeros((nv, nv), complex)
        met[0, 0] = 1.0
        if nv > 1:
            grid = self.model.grid
            met[1:, 1:] = [[grid.integrate(np.conj(p) * q) for q in self._pv] for p in self._pv]
        A = gyy + np.conj(gbb) + 0.5 * met - 0.5 * (np.outer(np.conj(a), a) + np.outer(abar, np.conj(abar)))
        A = 0.5 * (A + np.conj(A).T)
        Ab = gyb - 0.5 * np.outer(np.conj(a), abar)
        Ab = 0.5 * (Ab + Ab.T)
        return ComponentSet(t, "CR", A, Ab, a + ov[:nv], abar + ov[nv:], self.probes)

    def at(self, t: float) -> ComponentSet:
        return self.at_index(self.tgrid.index(t))

    def many(self, times) -> list:
        return [self.at(t) for t in times]


def _components(model, state, pert, xi, lam, omega_s, prop, t, probes, variant):
    if prop.variant != variant:
        raise ValueError(f"propagator table is {prop.variant}, expected {variant}")
    if abs(prop.lam - lam) > 1e-15 or abs(prop.omega_s - omega_s) > 1e-15:
        raise ValueError("propagator table was computed for different lambda / omega_S")
    eng = ComponentEngine(model, state, pert, xi, prop, probes)
    if np.ndim(t):
        return eng.many(t)
    return eng.at(float(t))


def components_rwa(model, state, pert, xi, lam, omega_s, prop, t, probes=()):
    """Rotating-wave ComponentSet(s) at time(s) t on the propagator grid."""
    return _components(model, state, pert, xi, lam, omega_s, prop, t, probes, "RWA")


def components_cr(model, state, pert, xi, lam, omega_s, prop, t, probes=()):
    """Counter-rotating ComponentSet(s) at time(s) t on the propagator grid."""
    return _components(model, state, pert, xi, lam, omega_s, prop, t, probes, "CR")
