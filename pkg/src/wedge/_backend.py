"""Select the kernel implementation at import time.

The compiled extension is used when it imports; setting the environment
variable ``WEDGE_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

from . import _fallback

NAME = "python"
integrate_eta = _fallback.integrate_eta
simulate_batch = _fallback.simulate_batch

if os.environ.get("WEDGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None
    if _kernels is not None:
        NAME = "compiled"
        integrate_eta = _kernels.integrate_eta
        simulate_batch = _kernels.simulate_batch


def kernels(name=None):
    """Return the kernel module by name ('compiled' or 'python'); default is active."""
    if name is None:
        name = NAME
    if name == "python":
        return _fallback
    from . import _kernels as mod

    return mod
