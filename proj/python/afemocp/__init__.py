"""Adaptive finite elements for control-constrained elliptic optimal control.

The solver discretizes the state and adjoint with continuous P1 elements and
keeps the control variational: it is induced pointwise from the adjoint via
u = max(a, min(b, -p/alpha)). Meshes are refined by newest-vertex bisection
driven by Doerfler marking on L2-norm residual indicators.
"""

from ._core import (
    Mesh,
    Problem,
    Solution,
    afem_run,
    contraction_lambda,
    doerfler_mark,
    example1,
    example2,
    exact_errors,
    indicators,
    poisson,
    problem,
    refine,
    solve,
    unit_square_mesh,
    write_vtk,
)

__all__ = [
    "Mesh",
    "Problem",
    "Solution",
    "afem_run",
    "contraction_lambda",
    "doerfler_mark",
    "example1",
    "example2",
    "exact_errors",
    "indicators",
    "poisson",
    "problem",
    "refine",
    "solve",
    "unit_square_mesh",
    "write_vtk",
]
