"""Moments and witnesses read off a ComponentSet.

Analytic formulas follow from differentiating the Gaussian functional; the
finite-difference helpers differentiate :func:`eval_charfunc` directly and
serve as an independent check of those formulas.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charfunc import ComponentSet, SystemInitState, eval_charfunc
from .reservoir import MixingState, GridFunction, _values


@dataclass
class Moments:
    """Full moments of the operators c_mu = (a, P_1^dag b, ..., P_p^dag b).

    ``mean[mu] = <c_mu>``, ``anti[mu, nu] = <c_mu c_nu^dag>``, ``anom[mu, nu] = <c_mu c_nu>``.
    """

    mean: np.ndarray
    anti: np.ndarray
    anom: np.ndarray


def moments(cs: ComponentSet, sys: SystemInitState) -> Moments:
    eta, etab = cs.eta, cs.etabar
    m = np.conj(eta) * sys.alpha - etab * np.conj(sys.alpha)
    k = 1 + sys.n0
    anti = (cs.A + k * (np.outer(np.conj(eta), eta) + np.outer(etab, np.conj(etab)))
            + np.outer(m, np.conj(m)))
    anom = (-2 * cs.Abar - k * (np.outer(np.conj(eta), etab) + np.outer(etab, np.conj(eta)))
            + np.outer(m, m))
    return Moments(m, anti, anom)


def coherence_t(cs: ComponentSet, sys: SystemInitState) -> complex:
    """<a>(t) = h_a alpha - hbar_a alpha^*."""
    return complex(cs.h_a * sys.alpha - cs.hbar_a * np.conj(sys.alpha))


def occupation_t(cs: ComponentSet, sys: SystemInitState) -> float:
    """<a^dag a>(t) = A_aa + (1 + n0)(|h_a|^2 + |hbar_a|^2) + |<a>|^2 - 1."""
    a = coherence_t(cs, sys)
    val = cs.A_aa + (1 + sys.n0) * (abs(cs.h_a) ** 2 + abs(cs.hbar_a) ** 2) + abs(a) ** 2 - 1
    return float(val)


def squeezing_t(cs: ComponentSet, sys: SystemInitState) -> complex:
    """<aa>(t).  For a rotating-wave set no anomalous part exists and this is <a>^2."""
    a = coherence_t(cs, sys)
    if cs.variant == "RWA":
        return complex(a * a)
    val = -2 * cs.Abar_aa - 2 * (1 + sys.n0) * cs.h_a * cs.hbar_a + a * a
    return complex(val)


def sb_correlation(cs: ComponentSet, sys: SystemInitState, probe_index: int) -> complex:
    """<a (P^dag b)^dag>(t) for probe P = probes[probe_index].

    With a node-delta probe (see :func:`delta_probe`) this is <a b_w^dag>.
    """
    return complex(moments(cs, sys).anti[0, probe_index + 1])


def delta_probe(grid, omega: float) -> GridFunction:
    """Grid representation of delta(w - omega) at the nearest node."""
    k = int(np.argmin(np.abs(grid.nodes - omega)))
    if abs(grid.nodes[k] - omega) > 1e-9 * grid.omega_max:
        raise ValueError(f"omega = {omega} is not a grid node")
    v = np.zeros(grid.n_points, complex)
    v[k] = 1.0 / grid.weights[k]
    return GridFunction(grid, v)


def correlation_witness(cs: ComponentSet, probe_index: int) -> float:
    """|A_ba(P)| + |h_b(P)| (+ |Abar_ba(P)| + |hbar_b(P)| for the CR model)."""
    w = abs(cs.A_ba(probe_index)) + abs(cs.h_b(probe_index))
    if cs.variant == "CR":
        w += abs(cs.Abar_ba(probe_index)) + abs(cs.hbar_b(probe_index))
    return float(w)


def mixing_witness(cs: ComponentSet, state: MixingState, probe_index: int) -> float:
    """|A_bb(P) - int |P|^2 (1 + N)|."""
    grid = state.grid
    p = _values(cs.probes[probe_index], grid)
    ref = grid.integrate(np.abs(p) ** 2 * (1 + state.N))
    return float(abs(cs.A_bb(probe_index) - ref))


# -- finite differences --------------------------------------------------

def _richardson(f, h):
    """Fourth-order central difference from second-order ones at h and h/2."""
    d1, d2 = f(h), f(h / 2)
    return (4 * d2 - d1) / 3


def fd_moments(cs: ComponentSet, sys: SystemInitState, h: float = 1e-3) -> Moments:
    """Moments from numerical Wirtinger derivatives of the functional at J = 0.

    J and J^* are varied independently through the analytic continuation
    offered by :func:`eval_charfunc`.
    """
    nv = cs.A.shape[0]
    zero = np.zeros(nv, complex)

    def G(v, vb):
        return eval_charfunc(cs, sys, v[0], v[1:], vb[0], vb[1:])

    def unit(i, s):
        e = zero.copy()
        e[i] = s
        return e

    mean = np.empty(nv, complex)
    anti = np.empty((nv, nv), complex)
    anom = np.empty((nv, nv), complex)
    for mu in range(nv):
        # <c_mu> = dG/dv_mu^*
        mean[mu] = _richardson(lambda s: (G(zero, unit(mu, s)) - G(zero, unit(mu, -s))) / (2 * s), h)
    for mu in range(nv):
        for nu in range(nv):
            # <c_mu c_nu^dag> = -d^2 G / dv_mu^* dv_nu
            def mixed(s):
                return (G(unit(nu, s), unit(mu, s)) - G(unit(nu, -s), unit(mu, s))
                        - G(unit(nu, s), unit(mu, -s)) + G(unit(nu, -s), unit(mu, -s))) / (4 * s * s)
            anti[mu, nu] = -_richardson(mixed, h)

            # <c_mu c_nu> = d^2 G / dv_mu^* dv_nu^*
            def pure(s):
                if mu == nu:
                    return (G(zero, unit(mu, s)) - 2 * G(zero, zero) + G(zero, unit(mu, -s))) / (s * s)
                e = lambda a, b: unit(mu, a) + unit(nu, b)  # noqa: E731
                return (G(zero, e(s, s)) - G(zero, e(s, -s)) - G(zero, e(-s, s)) + G(zero, e(-s, -s))) / (4 * s * s)
            anom[mu, nu] = _richardson(pure, h)
    return Moments(mean, anti, anom)
