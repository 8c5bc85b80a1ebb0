"""Select the numerical kernel backend at import time.

The compiled extension (``spcdist._ckernels``, built from Cython) is used
when available; otherwise the pure NumPy/SciPy fallback.  Set
``SPCDIST_BACKEND=python`` or ``SPCDIST_BACKEND=c`` to force a choice;
forcing ``c`` raises if the extension was not built.
"""

import os

_requested = os.environ.get("SPCDIST_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from spcdist import _ckernels as kernels
    except ImportError:
        from spcdist import _pykernels as kernels
elif _requested in ("c", "compiled", "cython"):
    from spcdist import _ckernels as kernels
elif _requested in ("python", "py", "numpy"):
    from spcdist import _pykernels as kernels
else:
    raise ImportError(
        f"unknown SPCDIST_BACKEND={_requested!r}; use 'auto', 'c' or 'python'"
    )

backend_name = kernels.BACKEND_NAME

fit_natural = kernels.fit_natural
RemlObjective = kernels.RemlObjective
eval_piecewise = kernels.eval_piecewise
pair_l2sq = kernels.pair_l2sq


def available_backends():
    """Names of the kernel backends importable in this environment."""
    names = ["python"]
    try:
        from spcdist import _ckernels  # noqa: F401

        names.insert(0, "c")
    except ImportError:
        pass
    return names
