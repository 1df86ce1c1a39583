"""Kernel selection.

The compiled ``_ckernels`` extension is used when importable; otherwise, or
when ``RICCI_SBM_PURE=1`` is set, the pure-Python kernels are used. Both expose
``transport``, ``edge_wasserstein`` and ``lly_edges`` with identical contracts.
"""
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

pure = _pykernels

if os.environ.get("RICCI_SBM_PURE") == "1":
    kernels = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as kernels
        NAME = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        logger.warning("compiled kernel unavailable; falling back to pure Python")
        kernels = _pykernels
        NAME = "python"

compiled = kernels if NAME == "cython" else None
