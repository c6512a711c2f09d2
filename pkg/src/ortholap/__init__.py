"""Numerical laboratory for the orthogonal (constraint-degenerate) Laplacian.

The package is organized around one pipeline:

    expr        tiny arithmetic expression language for user-defined fields
    fields      constraining vector fields and pointwise geometry (helicity,
                field force, field charge, orthogonal/parallel splitting)
    grid        cell-centered box grids, sampling, discrete calculus,
                quadratic forms
    assembly    sparse operators: the negative orthogonal Laplacian and the
                flux-form diffusion generator
    krylov      conjugate gradients with deflation, smallest-eigenvalue
                estimation, nullspace counting
    poincare    closed-form orthogonal auxiliary fields and certified
                helicity-based lower bounds on the spectrum
    diffusion   time integration of the constrained diffusion equation
    montecarlo  constrained-noise particle ensembles and density comparison
    cli         config-driven command line driver
"""

__version__ = "0.1.0"
