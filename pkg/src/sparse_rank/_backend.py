"""Select compiled kernels when available, else the pure-Python fallback.

Set ``SPARSE_RANK_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pure

compiled = None
if os.environ.get("SPARSE_RANK_PURE", "").strip() not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

kernels = compiled if compiled is not None else _pure
BACKEND = "compiled" if compiled is not None else "pure"

gf2_rank = kernels.gf2_rank
gfp_rank = kernels.gfp_rank
peel = kernels.peel


def available_backends() -> dict:
    out = {"pure": _pure}
    if compiled is not None:
        out["compiled"] = compiled
    return out
