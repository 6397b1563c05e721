"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; otherwise, or when
``CORRPRA_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy fallback is used. ``BACKEND`` names the active choice.
"""

from __future__ import annotations

import os

_force_python = os.environ.get("CORRPRA_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    from ._fallback import (  # noqa: F401
        KernelConvergenceError,
        ema_filter,
        jacobi_eigh,
        power_iteration,
        weighted_gram,
    )

    BACKEND = "python"
else:
    try:
        from ._kernels import (  # noqa: F401
            KernelConvergenceError,
            ema_filter,
            jacobi_eigh,
            power_iteration,
            weighted_gram,
        )

        BACKEND = "cython"
    except ImportError:
        from ._fallback import (  # noqa: F401
            KernelConvergenceError,
            ema_filter,
            jacobi_eigh,
            power_iteration,
            weighted_gram,
        )

        BACKEND = "python"


def available_backends():
    """Kernel modules importable in this environment, keyed by name."""
    from . import _fallback

    found = {"python": _fallback}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
