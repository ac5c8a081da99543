"""Optional numba acceleration.

Set ``KLMISMATCH_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When
numba is not importable the numpy path is used automatically.
"""
import os

_DISABLED = os.environ.get("KLMISMATCH_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}

try:
    if _DISABLED:
        raise ImportError("numba disabled by KLMISMATCH_DISABLE_NUMBA")
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAS_NUMBA = False


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if numba is None:
            return f
        return numba.njit(**kwargs)(f)

    return wrap if func is None else wrap(func)


def backend_name() -> str:
    return "numba" if HAS_NUMBA else "numpy"
