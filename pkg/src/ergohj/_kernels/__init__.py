"""Hot-loop kernels with a compiled core and a numpy fallback.

The Euler-Maruyama path stepper dominates the wall time of the control
simulation (tens of millions of sequential steps), so it is implemented
twice: a Cython extension (built at install time) and a numpy fallback that
vectorizes over paths.  The fallback is selected automatically when the
extension is missing, or forced with ERGOHJ_PURE_PYTHON=1.  Both backends
execute the identical arithmetic per step (the extension is compiled with
FP contraction off), so results agree to rounding level -- numpy's SIMD
pow/exp may differ from libm by an ulp -- and each backend is bit-exactly
reproducible for a fixed seed.  `benchmarks/` holds the speed comparison.
"""

import os

if os.environ.get("ERGOHJ_PURE_PYTHON", "0") not in ("", "0"):
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl

        BACKEND = "python"

em_chunk = _impl.em_chunk


def get_backend(name: str | None = None):
    """Return (module, label); name in {None, "auto", "python", "cython"}."""
    if name in (None, "auto"):
        return _impl, BACKEND
    if name == "python":
        from . import _pykernels

        return _pykernels, "python"
    if name == "cython":
        from . import _core  # raises ImportError when not built

        return _core, "cython"
    raise ValueError(f"unknown kernel backend {name!r}")
