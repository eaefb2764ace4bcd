"""Backend selection for the consensus step loop.

The compiled kernel is used when it imports; otherwise the numpy version.
``WLACONS_BACKEND=python`` forces the fallback, ``WLACONS_BACKEND=cython``
makes a missing extension an import error instead of a silent fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} is not available; have {available_backends()}") from None


def _select() -> str:
    wanted = os.environ.get("WLACONS_BACKEND", "").strip().lower()
    if wanted:
        get_backend(wanted)
        return wanted
    return "cython" if _ckernels is not None else "python"


BACKEND = _select()
advance = get_backend(BACKEND).advance
