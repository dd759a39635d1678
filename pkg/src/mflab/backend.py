"""Kernel backend selection.

The compiled extension is preferred when importable; set MFLAB_PURE=1 to
force the pure-numpy fallback (useful for parity checks and benchmarks).
"""

import os

if os.environ.get("MFLAB_PURE", "0") not in ("", "0"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]


def backend_name() -> str:
    return "compiled" if kernels.IS_COMPILED else "pure-python"
