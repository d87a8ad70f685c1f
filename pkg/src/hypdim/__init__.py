"""Numerical lab for limit-set dimensions and convex-core entropy.

Submodules
----------
hypcore     exact hyperbolic-geometry primitives (ball / upper half-space)
groups      Schottky group construction, pruned orbit enumeration, growth exponents
limitset    boundary point clouds and scale-based dimension / porosity estimators
ccentropy   uniformly distributed sets, counting exponents, atomic measures, shadows
pantsgraph  pants-decomposition graphs, isoperimetric profiles, spectral bound chains
cli         batch front-end with machine-readable reports
"""

__version__ = "0.1.0"
