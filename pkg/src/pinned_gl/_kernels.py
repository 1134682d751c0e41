"""Select the compiled kernels when available, else the numpy fallback.

Individual calls can still pick a backend by name through ``get``.
"""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _core as backend
except ImportError:  # pragma: no cover - depends on the build
    backend = _fallback

BACKEND = backend.BACKEND


def get(name: str | None = None):
    """Return a backend module by name (``compiled`` or ``python``)."""
    if name is None:
        return backend
    if name == "python":
        return _fallback
    from . import _core

    return _core


def threads() -> int:
    try:
        return max(1, int(os.environ.get("PINNED_GL_THREADS", "1")))
    except ValueError:
        return 1
