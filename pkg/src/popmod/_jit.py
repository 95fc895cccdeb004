"""Switch between the numba kernels and the pure numpy fallbacks.

Set ``POPMOD_DISABLE_JIT=1`` in the environment (or call
:func:`disable_jit`) to run every kernel through its numpy path.
"""

import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

ENABLE_JIT = HAVE_NUMBA and os.environ.get("POPMOD_DISABLE_JIT", "").lower() not in (
    "1",
    "true",
    "yes",
)


def enable_jit():
    global ENABLE_JIT
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    ENABLE_JIT = True


def disable_jit():
    global ENABLE_JIT
    ENABLE_JIT = False


def jit_enabled() -> bool:
    return ENABLE_JIT
