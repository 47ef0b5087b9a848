"""Backend selection for the hot kernels.

The relaxation sweeps, the inf-convolution and the brute-force distance
queries exist twice: once as numba-compiled loops and once as vectorised
numpy code performing the same arithmetic in the same order. The numba path
is used when numba imports and the environment variable ``DEGENFB_NUMBA`` is
not set to a false value (``0``, ``false``, ``no``, ``off``).
"""
from __future__ import annotations

import contextlib
import os

ENV_FLAG = "DEGENFB_NUMBA"

try:  # pragma: no cover - depends on the environment
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

_override: str | None = None


def _env_allows_numba() -> bool:
    value = os.environ.get(ENV_FLAG, "1").strip().lower()
    return value not in {"0", "false", "no", "off"}


def backend_name() -> str:
    """Name of the backend used for the next kernel call."""
    if _override is not None:
        return _override
    return "numba" if HAVE_NUMBA and _env_allows_numba() else "numpy"


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily force ``'numba'`` or ``'numpy'`` kernels."""
    global _override
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    previous = _override
    _override = name
    try:
        yield
    finally:
        _override = previous


def set_threads(n: int | None) -> int:
    """Set the numba thread count (clipped to what numba allows); returns it."""
    if n is None or not HAVE_NUMBA:
        return 1
    import numba

    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
