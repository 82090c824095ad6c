"""Face-lifting reachability with polyhedral flow-tube over-approximation."""

from . import cli, errors, expr, facelift, flow, geometry, golden, hybrid, modelfile, polyapprox

__all__ = [
    "cli",
    "errors",
    "expr",
    "facelift",
    "flow",
    "geometry",
    "golden",
    "hybrid",
    "modelfile",
    "polyapprox",
]
__version__ = "0.1.0"
