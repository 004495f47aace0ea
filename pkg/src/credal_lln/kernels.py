"""Backend selection for the sampling kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``CREDAL_LLN_PURE=1`` to force the fallback. Both backends produce
bit-identical streams: Philox4x64-10 keyed by ``(seed, 0)`` with counter
``(trial, step, 0, 0)``, one 53-bit uniform per (trial, step).
"""
import os

from . import _kernels_py

try:
    if os.environ.get("CREDAL_LLN_PURE"):
        raise ImportError("fallback forced by CREDAL_LLN_PURE")
    from . import _kernels as _impl
except ImportError:
    _impl = _kernels_py

BACKEND = _impl.BACKEND
GENERATOR = "philox4x64-10"

philox4x64 = _impl.philox4x64
philox_raw = _impl.philox_raw
uniforms = _impl.uniforms
draw_step = _impl.draw_step


def backends():
    """Every importable backend module, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out
