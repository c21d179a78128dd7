"""Kernel selection: the compiled Cython core when importable, numpy otherwise.

Set ``EULERARNOLD_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _fallback

if os.environ.get("EULERARNOLD_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

if _compiled is not None:
    eval_real = _compiled.eval_real
    eval_complex = _compiled.eval_complex
    BACKEND = "cython"
else:
    eval_real = _fallback.eval_real
    eval_complex = _fallback.eval_complex
    BACKEND = "numpy"

__all__ = ["BACKEND", "eval_real", "eval_complex"]
