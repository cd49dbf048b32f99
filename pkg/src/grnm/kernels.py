"""Backend selection for the proximal inner loops.

Imports the compiled extension when it was built, otherwise the numpy
implementation.  Both expose ``accelerated_prox_min`` and ``plain_prox_min``
with identical signatures and semantics.
"""

try:
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build environment
    from . import _kernels_py as _impl

    BACKEND = "python"

accelerated_prox_min = _impl.accelerated_prox_min
plain_prox_min = _impl.plain_prox_min


def backend():
    """Name of the active implementation: ``"compiled"`` or ``"python"``."""
    return BACKEND
