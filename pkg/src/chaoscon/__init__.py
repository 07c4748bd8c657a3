"""Numerical checks of concentration inequalities and moment bounds for chaoses.

Subpackages and modules:

* :mod:`chaoscon.distributions` - one-dimensional laws and the class M(m, sigma^2) checks
* :mod:`chaoscon.entropy` - Phi-entropies, tensorization, log-Sobolev ratios, Herbst tails
* :mod:`chaoscon.chaos` - chaos evaluation, constrained suprema, norms and moment/tail bounds
* :mod:`chaoscon.oracles` - exact and brute-force reference computations, bootstrap
* :mod:`chaoscon.harness` - experiment configs, runners, reports and the command line
"""

from chaoscon.distributions import ClassMParams, DistributionSpec, check_class_m
from chaoscon.oracles import ExactDistribution
from chaoscon.rng import RandomStream

__version__ = "0.1.0"

__all__ = ["ClassMParams", "DistributionSpec", "ExactDistribution", "RandomStream", "check_class_m", "__version__"]
