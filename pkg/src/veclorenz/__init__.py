"""Bivariate vector Lorenz maps, inverse Lorenz functions and Gini indices.

The fitted vector quantile of a weighted sample is the gradient of a
max-affine potential obtained from semi-discrete optimal transport of the
uniform law on the unit square; all rank-rectangle integrals are exact
polygon computations on its power diagram.
"""

__version__ = "0.1.0"

from .geometry import ConvexPolygon, PowerDiagram, build_power_diagram  # noqa: E402
from .ot_solver import ConvergenceError, SolverConfig, TransportFit, solve  # noqa: E402
from .lorenz import FittedLorenz, IlfGrid, gini, ilf, lorenz_map  # noqa: E402

__all__ = [
    "ConvexPolygon", "PowerDiagram", "build_power_diagram",
    "ConvergenceError", "SolverConfig", "TransportFit", "solve",
    "FittedLorenz", "IlfGrid", "gini", "ilf", "lorenz_map",
]
