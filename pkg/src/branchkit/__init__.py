"""branchkit: weighted branching simulation, exact order-1 transport
distances, coupling-bound certification, convergence experiments, and
configuration-model / ranking applications."""

__version__ = "0.1.0"

from ._kernel import available_backends, backend_name

__all__ = ["available_backends", "backend_name", "__version__"]
