"""Short trajectories of the quadratic differential lambda^2 (z-a)(z-b)/(z^2-1)^2 dz^2
and the zero distribution of Jacobi polynomials with varying complex parameters."""

from .qdiff import (
    ParameterError,
    QDParams,
    from_jacobi,
    period_values,
    property_p,
    residues,
    validate,
)
from .tracer import CriticalGraph, Fate, StepLimits, Topology, build_graph

__all__ = [
    "CriticalGraph",
    "Fate",
    "ParameterError",
    "QDParams",
    "StepLimits",
    "Topology",
    "build_graph",
    "from_jacobi",
    "period_values",
    "property_p",
    "residues",
    "validate",
]
