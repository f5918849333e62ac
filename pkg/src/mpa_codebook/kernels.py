"""Search-kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy
implementation takes over. Set ``MPA_CODEBOOK_BACKEND=python`` to force the
fallback.
"""

import os

from . import _kernels_py

TIE_RTOL = _kernels_py.TIE_RTOL

_compiled = None
if os.environ.get("MPA_CODEBOOK_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
_active = BACKENDS[BACKEND]


def use_backend(name):
    """Switch the active backend (``"compiled"`` or ``"python"``)."""
    global BACKEND, _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND = name
    _active = BACKENDS[name]


def greedy_search(proj, alphabet, rtol=TIE_RTOL):
    return _active.greedy_search(proj, alphabet, rtol)


def phase_search(base, rotated, phases, rtol=TIE_RTOL):
    return _active.phase_search(base, rotated, phases, rtol)
