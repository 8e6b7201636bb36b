"""Solvers for finite-horizon two-player zero-sum stochastic games with
asymmetric information, built on a common-information-belief dynamic program.
"""

__version__ = "0.1.0"
