"""Hot-loop kernels, compiled when the extension is built, numpy otherwise.

Set ``RISAE_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("RISAE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

exhaustive_search = _impl.exhaustive_search
ml_detect = _impl.ml_detect
bit_errors = _impl.bit_errors
ml_detect_errors = _impl.ml_detect_errors
adam_step = _impl.adam_step

__all__ = ["BACKEND", "exhaustive_search", "ml_detect", "bit_errors", "ml_detect_errors", "adam_step"]
