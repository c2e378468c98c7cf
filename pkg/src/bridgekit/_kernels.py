"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set BRIDGEKIT_PURE=1 before import to force the numpy fallback even
when the extension built. ``COMPILED`` records which route is live.
"""

from __future__ import annotations

import os

from . import _purekern

COMPILED = False
_ckern = None
if not os.environ.get("BRIDGEKIT_PURE"):
    try:
        from . import _ckern  # type: ignore[no-redef]
        COMPILED = True
    except ImportError:
        _ckern = None


def drift_eval(packed, x, femb):
    if COMPILED:
        return _ckern.drift_eval(packed, x, femb)
    return _purekern.drift_eval(packed, x, femb)


def lap_assign(cost):
    if COMPILED:
        return _ckern.lap_assign(cost)
    return _purekern.lap_assign(cost)
