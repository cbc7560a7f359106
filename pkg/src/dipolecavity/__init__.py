"""Radiative corrections and decay rates of a point dipole in a molecular cavity.

Modules
-------
numerics
    Quadrature with poles, semi-infinite tails and series summation.
propagators
    Free and bulk photon propagators in the transverse/longitudinal basis.
correlations
    Cavity and shell correlation functions and their Fourier transforms.
cavity_factors
    Convolutions of the correlation hole with the free propagator.
pseudo_susceptibility
    Recursive and resummed pseudo-susceptibilities, 1PI decomposition.
gamma_factors
    The γ factors in series, closed and 1PI forms; P/NP split.
emission
    Resonance condition, decay rates and the three emitter scenarios.
cli
    Scenario sweeps, result files and plot data.
"""

__version__ = "0.1.0"
