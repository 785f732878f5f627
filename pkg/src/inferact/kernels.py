"""Backend selection for the policy-scoring kernel.

The compiled extension is used when it imports; otherwise the numpy version.
Set ``INFERACT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("INFERACT_PURE_PYTHON", "") not in ("", "0"):
    _ext = None
else:
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "python"
modality_terms = _ext.modality_terms if _ext is not None else _kernels_py.modality_terms
modality_terms_py = _kernels_py.modality_terms
