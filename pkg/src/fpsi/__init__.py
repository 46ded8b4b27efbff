"""Finite-element solvers for Stokes flow coupled to a poroelastic medium.

The package provides a decoupled Robin-Robin time-stepping scheme built on a
four-field reformulation of the dynamic Biot equations, a monolithic
strongly-coupled reference solver, energy-balance audits, and the benchmark
drivers (manufactured convergence, cantilever bracket, arterial blood flow).
"""

__version__ = "0.1.0"
