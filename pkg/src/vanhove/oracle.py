"""Brute-force reference: the reservoir as M discrete modes, propagated exactly.

Mode k sits at grid node w_k and stands for the continuum operator
b_k = sqrt(w_k) b_{w_k} (w_k the quadrature weight), so a continuum probe J
becomes the discrete vector sqrt(w) J.  The one-particle flow is linear and is
propagated with the matrix exponential of its generator, obtained once by
diagonalisation.  Gaussian moments then follow from U S U^dag.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reservoir import MixingState, Perturbation, two_point_apply, _values
from .spectral import SpectralModel


@dataclass
class DiscreteModel:
    variant: str
    lam: float
    omega_s: float
    nodes: np.ndarray
    weights: np.ndarray
    couplings: np.ndarray  # lam * g_k * sqrt(w_k)
    generator: np.ndarray  # d z/dt = generator @ z
    _evals: np.ndarray
    _evecs: np.ndarray
    _evecs_inv: np.ndarray

    @property
    def M(self) -> int:
        return self.nodes.size

    @property
    def dim(self) -> int:
        return self.M + 1

    def propagator(self, t: float) -> np.ndarray:
        """U(t) = exp(generator * t)."""
        return (self._evecs * np.exp(self._evals * t)) @ self._evecs_inv

    def rows(self, vecs: np.ndarray, t: float) -> np.ndarray:
        """vecs^dag U(t) for a stack of column vectors, without forming U."""
        left = np.conj(vecs).T @ self._evecs
        return (left * np.exp(self._evals * t)) @ self._evecs_inv


def build_discrete(model: SpectralModel, lam: float, omega_s: float, M: int | None = None,
                   variant: str = "RWA") -> DiscreteModel:
    """Discrete-mode model on the nodes of ``model.grid`` (resampled to M nodes if given)."""
    if M is not None:
        if M < 2:
            raise ValueError("need at least two reservoir modes")
        if M != model.grid.n_points:
            model = model.refined(M)
    nodes, weights = model.grid.nodes, model.grid.weights
    c = lam * model.amplitude * np.sqrt(weights)
    d = nodes.size + 1
    ham = np.zeros((d, d), complex)
    ham[0, 0] = omega_s
    ham[np.arange(1, d), np.arange(1, d)] = nodes
    ham[0, 1:] = 1j * c
    ham[1:, 0] = -1j * c
    if variant == "RWA":
        evals, evecs = np.linalg.eigh(ham)
        gen = -1j * ham
        return DiscreteModel(variant, lam, omega_s, nodes, weights, c, gen,
                             -1j * evals, evecs, np.conj(evecs).T)
    if variant != "CR":
        raise ValueError(f"unknown model variant {variant!r}")
    pair = np.zeros((d, d))
    pair[0, 1:] = -c
    pair[1:, 0] = -c
    gen = np.block([[-1j * ham, pair], [pair, np.conj(-1j * ham)]])
    evals, evecs = np.linalg.eig(gen)
    return DiscreteModel(variant, lam, omega_s, nodes, weights, c, gen,
                         evals, evecs, np.linalg.inv(evecs))


@dataclass
class InitialMoments:
    """Connected Gaussian moments of the modes (a, b_1..b_M).

    ``normal[i, j] = <c_j^dag c_i>_c``, ``anomalous[i, j] = <c_i c_j>_c``.
    """

    mean: np.ndarray
    normal: np.ndarray
    anomalous: np.ndarray

    def check_positive(self, tol=1e-9):
        low = np.linalg.eigvalsh(self.normal).min()
        if low < -tol * max(1.0, np.abs(self.normal).max()):
            raise ValueError(f"initial second moments not positive (eigenvalue {low:.3g})")


def initial_moments(state: MixingState, pert: Perturbation, xi, sys) -> InitialMoments:
    """Moments of the correlated Gaussian initial state on the grid nodes."""
    grid = state.grid
    sw = np.sqrt(grid.weights)
    xi_v = _values(xi, grid)
    nxi = sw * two_point_apply(state, pert, xi_v)
    u = pert.vectors * sw
    nd = np.diag(state.N).astype(complex) + (u.T * pert.coeffs) @ np.conj(u)
    n0, alpha = sys.n0, sys.alpha
    d = grid.n_points + 1
    normal = np.empty((d, d), complex)
    normal[0, 0] = n0
    normal[0, 1:] = (1 + n0) * np.conj(nxi)
    normal[1:, 0] = (1 + n0) * nxi
    normal[1:, 1:] = nd + (1 + n0) * np.outer(nxi, np.conj(nxi))
    mean = np.concatenate([[alpha], nxi * alpha])
    return InitialMoments(mean, normal, np.zeros((d, d), complex))


@dataclass
class MomentRecord:
    """Full (not connected) moments of selected mode operators at one time.

    For mode vectors e_mu the operator is c_mu = sum_i conj(e_mu,i) c_i.
    ``mean[mu] = <c_mu>``, ``anti[mu, nu] = <c_mu c_nu^dag>``,
    ``anom[mu, nu] = <c_mu c_nu>``.
    """

    t: float
    mean: np.ndarray
    anti: np.ndarray
    anom: np.ndarray

    @property
    def a(self):
        return self.mean[0]

    @property
    def occupation(self):
        return (self.anti[0, 0] - 1).real

    @property
    def aa(self):
        return self.anom[0, 0]


def _anti_normal(init: InitialMoments) -> np.ndarray:
    d = init.mean.size
    return np.eye(d) + init.normal


def oracle_moments(dm: DiscreteModel, init: InitialMoments, t: float, modes=None) -> MomentRecord:
    """Moments at time t of the system mode and of ``modes`` (columns, default: a only)."""
    d = dm.dim
    if init.mean.size != d:
        raise ValueError("initial moments do not match the discrete model dimension")
    e = np.zeros((d, 1), complex)
    e[0, 0] = 1
    if modes is not None:
        modes = np.asarray(modes, complex).reshape(d, -1)
        e = np.hstack([e, modes])
    k = e.shape[1]
    if dm.variant == "RWA":
        rows = dm.rows(e, t)  # e^dag U
        mean = rows @ init.mean
        anti_c = rows @ _anti_normal(init) @ np.conj(rows).T
        anom_c = rows @ init.anomalous @ rows.T
    else:
        # z = (c, c^dag); c_mu = etilde^dag z and c_mu = z^dag f with f = (0, conj(e))
        et = np.vstack([e, np.zeros_like(e)])
        f = np.vstack([np.zeros_like(e), np.conj(e)])
        s0 = np.block([[_anti_normal(init), init.anomalous],
                       [np.conj(init.anomalous), init.normal.T]])
        z0 = np.concatenate([init.mean, np.conj(init.mean)])
        re = dm.rows(et, t)
        rf = dm.rows(f, t)
        mean = re @ z0
        anti_c = re @ s0 @ np.conj(re).T
        anom_c = re @ s0 @ np.conj(rf).T
    anti = anti_c + np.outer(mean, np.conj(mean))
    anom = anom_c + np.outer(mean, mean)
    assert anti.shape == (k, k)
    return MomentRecord(t, mean, anti, anom)


def full_moments(dm: DiscreteModel, init: InitialMoments, t: float):
    """Connected (mean, normal, anomalous) of all modes at time t."""
    d = dm.dim
    u = dm.propagator(t)
    if dm.variant == "RWA":
        mean = u @ init.mean
        normal = u @ init.normal @ np.conj(u).T
        anom = u @ init.anomalous @ u.T
        return mean, normal, anom
    s0 = np.block([[_anti_normal(init), init.anomalous],
                   [np.conj(init.anomalous), init.normal.T]])
    s = u @ s0 @ np.conj(u).T
    z = u @ np.concatenate([init.mean, np.conj(init.mean)])
    return z[:d], s[:d, :d] - np.eye(d), s[:d, d:]


def oracle_charfunc(dm: DiscreteModel, init: InitialMoments, j_a: complex, j_b, t: float,
                    moments=None) -> complex:
    """Anti-normally ordered generating function of the propagated Gaussian state.

    ``j_b`` is the continuum probe sampled on the grid nodes.  ``moments`` may
    carry a precomputed :func:`full_moments` result for the same t.
    """
    jd = np.concatenate([[j_a], np.sqrt(dm.weights) * np.asarray(j_b, complex)])
    mean, normal, anom = moments if moments is not None else full_moments(dm, init, t)
    lng = (-np.vdot(jd, jd) - np.vdot(jd, normal @ jd)
           + np.vdot(jd, mean) - np.vdot(mean, jd)
           + (np.vdot(jd, anom @ np.conj(jd))).real)
    return complex(np.exp(lng))


def symplectic_floor(dm: DiscreteModel, init: InitialMoments, t: float) -> float:
    """Smallest symplectic eigenvalue of the symmetrised quadrature covariance."""
    d = dm.dim
    _, normal, anom = full_moments(dm, init, t)
    # symmetric covariance of z = (c, c^dag): V = <{dz, dz^dag}>/2
    s = np.block([[np.eye(d) + normal, anom], [np.conj(anom), normal.T]])
    v = s - 0.5 * np.block([[np.eye(d), np.zeros((d, d))], [np.zeros((d, d)), -np.eye(d)]])
    eta = np.diag(np.concatenate([np.ones(d), -np.ones(d)]))
    ev = np.linalg.eigvals(eta @ v)
    return float(np.min(np.abs(ev.real)))
