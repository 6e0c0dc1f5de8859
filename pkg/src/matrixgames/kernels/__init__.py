"""Numeric kernel backend selection.

The compiled Cython backend (``_core``) is preferred when the extension built;
the numpy reference backend is the fallback. Set MATRIXGAMES_KERNELS to
``reference`` or ``compiled`` to force one (``compiled`` raises if the
extension is unavailable). Both backends implement the same operations in the
same order; see ``_reference`` for the contract docstrings.
"""

from __future__ import annotations

import os

from . import _reference

_requested = os.environ.get("MATRIXGAMES_KERNELS", "").strip().lower()

_compiled = None
if _requested != "reference":
    try:
        from . import _core as _compiled
    except ImportError:
        _compiled = None
        if _requested == "compiled":
            raise ImportError(
                "MATRIXGAMES_KERNELS=compiled but the extension is not built"
            )

ACTIVE = _compiled if _compiled is not None else _reference
BACKEND_NAME = ACTIVE.BACKEND_NAME

logistic = ACTIVE.logistic
cara = ACTIVE.cara
cara_dalpha = ACTIVE.cara_dalpha
levelk_all = ACTIVE.levelk_all
levelk_beliefs = ACTIVE.levelk_beliefs
levelk_all_grad = ACTIVE.levelk_all_grad
qre_solve = ACTIVE.qre_solve
qre_unrolled = ACTIVE.qre_unrolled
qre_unrolled_grad = ACTIVE.qre_unrolled_grad

reference = _reference
compiled = _compiled


def available_backends():
    out = {"reference": _reference}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
