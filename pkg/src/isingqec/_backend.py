"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``ISINGQEC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pycore

python_kernels = _pycore

if os.environ.get("ISINGQEC_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    compiled_kernels = None
else:
    try:
        from . import _core as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"


def get_kernels(name: str | None = None):
    """Kernel module by name (``"compiled"``, ``"python"`` or None for the default)."""
    if name is None:
        return kernels
    if name == "python":
        return python_kernels
    if name == "compiled":
        if compiled_kernels is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
