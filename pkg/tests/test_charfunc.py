import json

import numpy as np
import pytest

from vanhove.charfunc import (ComponentEngine, SystemInitState, check_correlated_state, components_cr,
                              components_rwa, eval_charfunc, initial_charfunc)
from vanhove.oracle import build_discrete, full_moments, initial_moments, oracle_charfunc
from vanhove.propagator import TimeGrid, solve
from vanhove.reservoir import CorrelationVector, Perturbation


@pytest.fixture(scope="module", params=["RWA", "CR"])
def engine(request, small):
    model, state, pert, xi, sys, probes = small
    prop = solve(model, 0.3, 1.0, TimeGrid(20.0, 2000), request.param)
    return ComponentEngine(model, state, pert, xi, prop, probes)


def _random_probe(rng, n=2):
    return complex(*rng.normal(size=2)), rng.normal(size=n) + 1j * rng.normal(size=n)


def test_system_state_validation():
    with pytest.raises(ValueError):
        SystemInitState(0.1, -0.5)
    s = SystemInitState(1, 2)
    assert isinstance(s.alpha, complex) and s.n0 == 2.0


def test_unit_at_zero_and_bounded(engine, small, rng):
    sys = small[4]
    for t in (0.0, 5.0, 20.0):
        cs = engine.at(t)
        assert abs(eval_charfunc(cs, sys, 0.0) - 1) < 1e-14
        for _ in range(200):
            ja, c = _random_probe(rng)
            assert abs(eval_charfunc(cs, sys, ja, c)) <= 1 + 1e-12


def test_initial_value(engine, small, rng):
    model, state, pert, xi, sys, probes = small
    cs = engine.at(0.0)
    for _ in range(20):
        ja, c = _random_probe(rng)
        jb = sum(ci * p.values for ci, p in zip(c, probes))
        assert abs(eval_charfunc(cs, sys, ja, c) - initial_charfunc(sys, state, pert, xi, ja, jb)) < 1e-12


def test_conjugation_symmetry(engine, small, rng):
    # anti-normal ordering: G(-J) = G(J)^*
    sys = small[4]
    cs = engine.at(7.5)
    for _ in range(20):
        ja, c = _random_probe(rng)
        assert abs(eval_charfunc(cs, sys, -ja, -c) - np.conj(eval_charfunc(cs, sys, ja, c))) < 1e-13


def test_rotation(engine, small, rng):
    sys = small[4]
    cs = engine.at(3.0)
    ph = np.exp(0.7j)
    rot = cs.rotated(ph)
    for _ in range(10):
        ja, c = _random_probe(rng)
        assert abs(eval_charfunc(rot, sys, ja, c) - eval_charfunc(cs, sys, ja * ph, c)) < 1e-13


def test_against_oracle(engine, small, rng):
    model, state, pert, xi, sys, probes = small
    variant = engine.variant
    dm = build_discrete(model, 0.3, 1.0, variant=variant)
    init = initial_moments(state, pert, xi, sys)
    for t in (5.0, 20.0):
        cs = engine.at(t)
        mom = full_moments(dm, init, t)
        for _ in range(10):
            ja, c = _random_probe(rng)
            ja, c = 0.5 * ja, 0.5 * c
            jb = sum(ci * p.values for ci, p in zip(c, probes))
            ref = oracle_charfunc(dm, init, ja, jb, t, moments=mom)
            assert abs(eval_charfunc(cs, sys, ja, c) - ref) < 1e-4


def test_correlated_state_check(small):
    model, state, pert, xi, sys, probes = small
    q = check_correlated_state(sys, state, pert, xi)
    assert 0 < q < 0.5
    big = CorrelationVector(model.grid, 4 * xi.values)
    with pytest.raises(ValueError, match="not positive"):
        check_correlated_state(sys, state, pert, big)
    with pytest.raises(ValueError):
        check_correlated_state(SystemInitState(0.0, 0.0), state, pert, xi)
    # zero correlation is always admissible
    assert check_correlated_state(SystemInitState(0.0, 0.0), state, Perturbation.none(model.grid),
                                  CorrelationVector(model.grid, 0 * xi.values)) == 0.0


def test_wrappers_and_json(small):
    model, state, pert, xi, sys, probes = small
    prop = solve(model, 0.2, 1.0, TimeGrid(4.0, 400), "RWA")
    sets = components_rwa(model, state, pert, xi, 0.2, 1.0, prop, [1.0, 2.0], probes)
    assert [s.t for s in sets] == [1.0, 2.0]
    with pytest.raises(ValueError):
        components_cr(model, state, pert, xi, 0.2, 1.0, prop, 1.0, probes)
    with pytest.raises(ValueError):
        components_rwa(model, state, pert, xi, 0.3, 1.0, prop, 1.0, probes)
    d = json.loads(sets[0].to_json())
    assert d["variant"] == "RWA" and len(d["A"]["re"]) == 3
    assert np.all(sets[1].Abar == 0) and np.all(sets[1].etabar == 0)
