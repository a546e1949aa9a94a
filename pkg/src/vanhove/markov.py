"""Weak-coupling (van Hove) side: scaled components, limit functional, master equation.

The van Hove limit lam -> 0 at fixed tau = lam^2 t is not computable directly;
it is approached by sweeping lam and checking that the distance to the limit
formulas shrinks.  The cost grows like 1/lam^2 (t_max = tau_max/lam^2), and a
run that would exceed the step budget raises :class:`ResourceError` instead of
silently truncating.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .charfunc import ComponentEngine, ComponentSet, SystemInitState
from .observables import coherence_t, correlation_witness, mixing_witness, squeezing_t
from .propagator import TimeGrid, convolve, solve
from .reservoir import (GridFunction, MixingState, Perturbation, _values, correlation_timescale,
                        fit_gaussian_timescale, occupation, two_time_kernel)
from .spectral import SpectralModel, delta_bar, fourier_series, gamma, lamb_shift, laplace_transform


class ResourceError(RuntimeError):
    def __init__(self, lam, n_steps, limit):
        super().__init__(f"lambda = {lam}: t_max = tau_max/lambda^2 needs {n_steps} time steps, "
                         f"above the budget of {limit}")
        self.lam = lam


@dataclass
class Setup:
    """Inputs of one exact pipeline run (everything except lambda and the time grid)."""

    model: SpectralModel
    state: MixingState
    pert: Perturbation
    xi: GridFunction
    sys: SystemInitState
    omega_s: float = 1.0
    probes: tuple = ()
    variant: str = "RWA"
    dt_max: float | None = None
    max_steps: int = 60000

    def __post_init__(self):
        self.probes = tuple(self.probes)
        if self.dt_max is None:
            self.dt_max = 0.5 / self.model.grid.omega_max
        self.pert.check_positive(self.state)

    def rates(self):
        """(Gamma, effective shift, N) at omega_S; the shift is Delta - Delta_bar for CR."""
        w = self.omega_s
        g = gamma(self.model, w)
        d = lamb_shift(self.model, w)
        if self.variant == "CR":
            d -= delta_bar(self.model, w)
        return g, d, float(occupation(self.state, w))

    def time_grid(self, lam, tau_max, n_tau) -> TimeGrid:
        t_max = tau_max / lam**2
        tg = TimeGrid.fitting(t_max, self.dt_max, multiple=n_tau)
        if tg.n_steps > self.max_steps:
            raise ResourceError(lam, tg.n_steps, self.max_steps)
        return tg

    def engine(self, lam, tgrid, xi=None) -> ComponentEngine:
        prop = solve(self.model, lam, self.omega_s, tgrid, self.variant)
        return ComponentEngine(self.model, self.state, self.pert,
                               self.xi if xi is None else xi, prop, self.probes)


def scaled_series(setup: Setup, lam: float, tau_max: float, n_tau: int, xi=None):
    """Scaled ComponentSets at tau_k = k tau_max / n_tau, k = 0..n_tau.

    Each set is taken at t = tau/lam^2 and carried to the frame rotating at
    omega_S (J_a -> J_a exp(-i omega_S t)).
    """
    tg = setup.time_grid(lam, tau_max, n_tau)
    eng = setup.engine(lam, tg, xi)
    stride = tg.n_steps // n_tau
    out = []
    for k in range(n_tau + 1):
        j = k * stride
        cs = eng.at_index(j)
        out.append(cs.rotated(np.exp(-1j * setup.omega_s * cs.t)))
    return out, eng


def scaled_components(setup: Setup, lam: float, tau: float) -> ComponentSet:
    """Scaled ComponentSet at a single tau."""
    sets, _ = scaled_series(setup, lam, tau, 1)
    return sets[-1]


# -- limit functional and master equation --------------------------------

def limit_charfunc(state: MixingState, gamma_s: float, delta_s: float, omega_s: float,
                   sys: SystemInitState, j_a: complex, j_b, tau: float) -> complex:
    """Limit functional at scaled time tau (frame rotating at omega_S).

    exp(-|J_a|^2 (1+N_S)(1-e^{-Gamma tau})) exp(-int |J_b|^2 (1+N)) G_S(J_a e^{-Gamma tau/2 + i Delta tau}).
    The correlation vector never enters.
    """
    grid = state.grid
    jb = _values(j_b, grid)
    n_s = _occ_at(state, omega_s)
    decay = np.exp(-gamma_s * tau)
    res = grid.integrate(np.abs(jb) ** 2 * (1 + state.N))
    x = j_a * np.exp(-0.5 * gamma_s * tau + 1j * delta_s * tau)
    lng = -abs(j_a) ** 2 * (1 + n_s) * (1 - decay) - res + sys.log_gs(x)
    return complex(np.exp(lng))


def _occ_at(state, omega):
    return float(occupation(state, omega))


def limit_components(state: MixingState, gamma_s, delta_s, omega_s, tau, probes=()) -> ComponentSet:
    """The limit functional written as a ComponentSet (so the moment formulas apply)."""
    grid = state.grid
    pv = [_values(p, grid) for p in probes]
    nv = 1 + len(pv)
    A = np.zeros((nv, nv), complex)
    A[0, 0] = (1 + _occ_at(state, omega_s)) * (1 - np.exp(-gamma_s * tau))
    for i, p in enumerate(pv):
        for j, q in enumerate(pv):
            A[i + 1, j + 1] = grid.integrate(np.conj(p) * (1 + state.N) * q)
    eta = np.zeros(nv, complex)
    eta[0] = np.exp(-0.5 * gamma_s * tau + 1j * delta_s * tau)
    return ComponentSet(tau, "limit", A, np.zeros((nv, nv), complex), eta,
                        np.zeros(nv, complex), tuple(probes))


def lindblad_moments(gamma_s: float, delta_s: float, n_s: float, sys: SystemInitState, tau):
    """Closed-form (<a^dag a>, <a>) of the damped oscillator master equation.

    d rho/d tau = -i Delta [a^dag a, rho] + Gamma (1+N) D[a] rho + Gamma N D[a^dag] rho.
    """
    if gamma_s < 0:
        raise ValueError("decay rate must be non-negative")
    tau = np.asarray(tau, float)
    e = np.exp(-gamma_s * tau)
    occ = n_s + (sys.n0 - n_s) * e + abs(sys.alpha) ** 2 * e
    coh = sys.alpha * np.exp(-0.5 * gamma_s * tau - 1j * delta_s * tau)
    return occ, coh


def displaced_thermal_fock(sys: SystemInitState, dim: int, work_dim: int = 400) -> np.ndarray:
    """Density matrix of the displaced thermal state, built in a large space and cut to ``dim``."""
    n = np.arange(work_dim)
    if sys.n0 > 0:
        p = (sys.n0 / (1 + sys.n0)) ** n / (1 + sys.n0)
    else:
        p = (n == 0).astype(float)
    a = np.diag(np.sqrt(n[1:]), 1)
    disp = expm(sys.alpha * a.conj().T - np.conj(sys.alpha) * a)
    rho = disp @ np.diag(p) @ disp.conj().T
    return rho[:dim, :dim]


def lindblad_fock(gamma_s, delta_s, n_s, rho0: np.ndarray, taus):
    """Integrate the master equation in a truncated number basis; returns (<a^dag a>, <a>, <aa>) per tau.

    ``taus`` must be uniformly spaced from 0 (or a single value); the sparse
    generator is applied with scipy's expm_multiply.
    """
    dim = rho0.shape[0]
    a = sparse.diags(np.sqrt(np.arange(1, dim)), 1, format="csr").astype(complex)
    ad = a.conj().T.tocsr()
    eye = sparse.identity(dim, format="csr")

    def left(x):
        return sparse.kron(x, eye)

    def right(x):
        return sparse.kron(eye, x.T)

    def dissipator(c):
        cdc = c.conj().T @ c
        return left(c) @ right(c.conj().T) - 0.5 * (left(cdc) + right(cdc))

    h = delta_s * (ad @ a)
    gen = (-1j * (left(h) - right(h)) + gamma_s * (1 + n_s) * dissipator(a)
           + gamma_s * n_s * dissipator(ad)).tocsr()
    taus = np.atleast_1d(np.asarray(taus, float))
    vec0 = rho0.reshape(-1).astype(complex)
    if taus.size == 1:
        vecs = expm_multiply(gen * taus[0], vec0)[None, :]
    else:
        step = np.diff(taus)
        if taus[0] != 0 or not np.allclose(step, step[0]):
            raise ValueError("taus must start at 0 and be uniformly spaced")
        vecs = expm_multiply(gen, vec0, start=0.0, stop=taus[-1], num=taus.size, endpoint=True)
    occ, coh, sq = [], [], []
    aa = (a @ a).toarray()
    num = (ad @ a).toarray()
    for v in vecs:
        rho = v.reshape(dim, dim)
        occ.append(np.trace(num @ rho).real)
        coh.append(np.trace(a.toarray() @ rho))
        sq.append(np.trace(aa @ rho))
    return np.array(occ), np.array(coh), np.array(sq)


# -- prototype limits ----------------------------------------------------

PROTOTYPES = ("i", "ii", "iii", "iv", "v")


def _edge_laplace(grid, h, omega):
    return laplace_transform(grid, h, -1j * omega, plus0=True)


def prototype_check(kind: str, setup: Setup, lam: float, tau_max: float, n_tau: int,
                    f=None, g2=None, fp=None):
    """|LHS - RHS| of one prototype limit at tau_k = k tau_max/n_tau, k = 1..n_tau.

    f, fp (second test function) and the probe J default to the setup probes;
    g is the form factor.  For kind ii, ``g2`` is the second smooth function.
    """
    if kind not in PROTOTYPES:
        raise ValueError(f"unknown prototype {kind!r}; expected one of {PROTOTYPES}")
    model, state, pert = setup.model, setup.state, setup.pert
    grid = model.grid
    probes = setup.probes
    f = _values(f if f is not None else probes[0], grid)
    fp = _values(fp if fp is not None else (probes[1] if len(probes) > 1 else probes[0]), grid)
    g2 = _values(g2 if g2 is not None else fp, grid)
    gv = model.amplitude.astype(complex)
    w_s = setup.omega_s
    # the prototypes are built from the rotating-wave propagator G
    gam, dlt = gamma(model, w_s), lamb_shift(model, w_s)
    n_s = _occ_at(state, w_s)
    taus = tau_max * np.arange(1, n_tau + 1) / n_tau
    tg = setup.time_grid(lam, tau_max, n_tau)
    stride = tg.n_steps // n_tau
    idx = stride * np.arange(1, n_tau + 1)
    n1 = tg.n_steps + 1
    dt = tg.dt
    t = tg.times

    if kind == "ii":
        kfg = fourier_series(grid, np.conj(f) * g2, dt, n1)
        ker = two_time_kernel(state, pert, f, g2, dt, tg.n_steps)
        lim = grid.integrate(np.conj(f) * (1 + state.N) * g2)
        return taus, np.array([max(abs(kfg[j]), abs(ker.at(j, j) - lim)) for j in idx])

    G = solve(model, lam, w_s, tg, "RWA").values
    rot = np.exp(-0.5 * gam * taus - 1j * dlt * taus)
    if kind == "i":
        return taus, np.abs(G[idx] * np.exp(1j * w_s * t[idx]) - rot)

    kfg = fourier_series(grid, np.conj(f) * gv, dt, n1)
    kfg_g = convolve(kfg, G, dt)
    if kind == "iii":
        kgf = fourier_series(grid, np.conj(gv) * fp, dt, n1)
        lhs = convolve(kfg_g, kgf, dt)[idx] * np.exp(1j * w_s * t[idx])
        rhs = _edge_laplace(grid, np.conj(f) * gv, w_s) * _edge_laplace(grid, np.conj(gv) * fp, w_s) * rot
        return taus, np.abs(lhs - rhs)

    if kind == "iv":
        kfpg_g = convolve(fourier_series(grid, np.conj(fp) * gv, dt, n1), G, dt)
        ker = two_time_kernel(state, pert, gv, gv, dt, tg.n_steps)
        lhs = []
        for j in idx:
            w = np.full(j + 1, dt)
            w[0] = w[-1] = 0.5 * dt
            x = w * kfg_g[j::-1]
            y = w * np.conj(kfpg_g[j::-1])
            lhs.append(lam * lam * (x @ ker.matvec(j, y)))
        k1 = _edge_laplace(grid, np.conj(f) * gv, w_s)
        k2 = _edge_laplace(grid, np.conj(fp) * gv, w_s)
        rhs = k1 * np.conj(k2) * (1 + n_s) * (1 - np.exp(-gam * taus))
        return taus, np.abs(np.array(lhs) - rhs)

    # kind v: J = f, the inner test function is fp
    kpg_g = convolve(fourier_series(grid, np.conj(fp) * gv, dt, n1), G, dt)
    ker = two_time_kernel(state, pert, f, gv, dt, tg.n_steps)
    lhs = []
    for j in idx:
        w = np.full(j + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        lhs.append(ker.row(j) @ (w * np.conj(kpg_g[j::-1])))
    weight = np.conj(f) * (1 + state.N) * gv
    h = np.conj(fp) * gv
    inner = np.zeros(grid.n_points, complex)
    live = np.abs(weight) > 1e-14 * np.abs(weight).max()
    for k in np.flatnonzero(live):
        inner[k] = np.conj(_edge_laplace(grid, h, grid.nodes[k]))
    rhs = _edge_laplace(grid, weight * inner, w_s)
    return taus, np.abs(np.array(lhs) - rhs)


# -- free evolution ------------------------------------------------------

@dataclass
class FreeScan:
    times: np.ndarray
    correlation: np.ndarray
    mixing: np.ndarray
    fitted_correlation_time: float | None
    predicted_correlation_time: float | None
    fitted_mixing_time: float | None
    predicted_mixing_time: float | None


def free_factorization_scan(state: MixingState, pert: Perturbation, xi, sys: SystemInitState,
                            probe, model: SpectralModel, times_grid: TimeGrid,
                            omega_s: float = 1.0) -> FreeScan:
    """Witness trajectories of the lam = 0 functional with fitted and predicted timescales."""
    prop = solve(model, 0.0, omega_s, times_grid, "RWA")
    eng = ComponentEngine(model, state, pert, xi, prop, (probe,))
    sets = [eng.at_index(j) for j in range(times_grid.n_steps + 1)]
    t = times_grid.times
    corr = np.array([correlation_witness(cs, 0) for cs in sets])
    mix = np.array([mixing_witness(cs, state, 0) for cs in sets])

    def fit(w):
        if w[0] <= 1e-12:  # identically zero witness up to rounding
            return None
        try:
            return fit_gaussian_timescale(t, w)
        except ValueError:
            return None

    def predict(kind):
        try:
            return correlation_timescale(probe, xi=xi, state=state, pert=pert, kind=kind)
        except ValueError:
            return None

    return FreeScan(t, corr, mix, fit(corr), predict("factorization"), fit(mix),
                    predict("mixing") if pert.rank else None)


# -- van Hove sweeps -----------------------------------------------------

QUANTITIES = ("A_aa", "h_a", "correlation", "mixing", "Abar_aa", "squeezing", "xi_forgetting")


@dataclass
class VanHoveScan:
    lambdas: list
    taus: np.ndarray
    errors: dict = field(default_factory=dict)  # (quantity, lam) -> array over taus

    def __post_init__(self):
        lam = list(self.lambdas)
        if any(b >= a for a, b in zip(lam, lam[1:])):
            raise ValueError("lambdas must be strictly decreasing")

    def sup(self, quantity):
        return [float(np.max(self.errors[(quantity, lam)])) for lam in self.lambdas]

    def verdict(self, quantity, threshold=0.05):
        s = self.sup(quantity)
        mono = all(b < a for a, b in zip(s, s[1:]))
        return {"sup_errors": s, "monotone": mono, "final": s[-1],
                "final_below": s[-1] < threshold, "pass": mono and s[-1] < threshold}

    def rows(self):
        for q, lam in sorted(self.errors, key=lambda k: (k[0], -k[1])):
            for tau, e in zip(self.taus, self.errors[(q, lam)]):
                yield q, lam, tau, float(e)


def _scan_cell(args):
    setup, lam, tau_max, n_tau, quantities = args
    sets, eng = scaled_series(setup, lam, tau_max, n_tau)
    gam, dlt, n_s = setup.rates()
    taus = tau_max * np.arange(n_tau + 1) / n_tau
    sel = slice(1, None)
    out = {}
    if "A_aa" in quantities:
        out["A_aa"] = np.array([abs(cs.A_aa - (1 + n_s) * (1 - np.exp(-gam * tau)))
                                for cs, tau in zip(sets, taus)])[sel]
    if "h_a" in quantities:
        out["h_a"] = np.array([abs(cs.h_a - np.exp(-0.5 * gam * tau - 1j * dlt * tau))
                               for cs, tau in zip(sets, taus)])[sel]
    if "correlation" in quantities:
        out["correlation"] = np.array([correlation_witness(cs, 0) for cs in sets])[sel]
    if "mixing" in quantities:
        out["mixing"] = np.array([mixing_witness(cs, setup.state, 0) for cs in sets])[sel]
    if "Abar_aa" in quantities:
        out["Abar_aa"] = np.array([abs(cs.Abar_aa) for cs in sets])[sel]
    if "squeezing" in quantities:
        # anomalous moment beyond the coherent part, which the limit says vanishes
        out["squeezing"] = np.array([abs(squeezing_t(cs, setup.sys) - coherence_t(cs, setup.sys) ** 2)
                                     for cs in sets])[sel]
    if "xi_forgetting" in quantities:
        zero = GridFunction.zeros(setup.model.grid)
        sets0, _ = scaled_series(setup, lam, tau_max, n_tau, xi=zero)
        out["xi_forgetting"] = np.array([
            max(np.abs(a.A - b.A).max(), np.abs(a.eta - b.eta).max(),
                np.abs(a.Abar - b.Abar).max(), np.abs(a.etabar - b.etabar).max())
            for a, b in zip(sets, sets0)])[sel]
    return lam, out, sets


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("VANHOVE_WORKERS", "1")))
    except ValueError:
        return 1


def vanhove_scan(setup: Setup, lambdas=(0.4, 0.2, 0.1), tau_max=None, n_tau=24,
                 quantities=("A_aa", "h_a"), workers=None, keep_sets=False) -> VanHoveScan:
    """Errors against the limit formulas on tau_k = k tau_max / n_tau, k = 1..n_tau."""
    unknown = set(quantities) - set(QUANTITIES)
    if unknown:
        raise ValueError(f"unknown quantities {sorted(unknown)}")
    gam, _, _ = setup.rates()
    tau_max = 3.0 / gam if tau_max is None else tau_max
    scan = VanHoveScan(list(lambdas), tau_max * np.arange(1, n_tau + 1) / n_tau)
    for lam in lambdas:  # fail fast on the budget before any work
        setup.time_grid(lam, tau_max, n_tau)
    jobs = [(setup, lam, tau_max, n_tau, tuple(quantities)) for lam in lambdas]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_cell, jobs))
    else:
        results = [_scan_cell(j) for j in jobs]
    scan.sets = {}
    for lam, out, sets in sorted(results, key=lambda r: -r[0]):
        for q, v in out.items():
            scan.errors[(q, lam)] = v
        if keep_sets:
            scan.sets[lam] = sets
    return scan


def fitted_phase_rate(sets, taus) -> float:
    """Slope of -arg h_a against tau by least squares (intercept absorbs the initial slip)."""
    ph = np.unwrap(np.angle([cs.h_a for cs in sets]))
    slope, _ = np.polyfit(np.asarray(taus), ph, 1)
    return float(-slope)
