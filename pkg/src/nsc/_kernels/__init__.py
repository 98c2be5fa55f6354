"""Hot-loop kernels with a compiled core and a numpy fallback.

``NSC_BACKEND`` selects the implementation: ``auto`` (default) uses the
compiled extension when it imports and falls back to numpy otherwise;
``cython`` requires the extension; ``python`` forces the fallback.
"""

import os

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_choice = os.environ.get("NSC_BACKEND", "auto").lower()
if _choice not in ("auto", "cython", "python"):
    raise ImportError(f"NSC_BACKEND must be auto, cython or python, got {_choice!r}")
if _choice == "cython" and _core is None:
    raise ImportError("NSC_BACKEND=cython but nsc._kernels._core is not built")

if _core is not None and _choice != "python":
    backend = _core
    BACKEND = "cython"
else:
    backend = _fallback
    BACKEND = "python"

closed_loop_states = backend.closed_loop_states
gpc_loop = backend.gpc_loop

__all__ = ["BACKEND", "backend", "closed_loop_states", "gpc_loop"]
