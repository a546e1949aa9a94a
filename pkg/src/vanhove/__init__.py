"""Exact and weak-coupling dynamics of an oscillator coupled to a bosonic reservoir.

Modules: spectral (form factor, rates, shifts), reservoir (mixing state and
correlations), propagator (Volterra solvers), charfunc (exact characteristic
functional), observables, oracle (discrete-mode reference), markov (van Hove
limit and master equation), cli.
"""
__version__ = "0.1.0"
