"""Optional numba acceleration.

Kernels are written as plain Python loops and compiled lazily with numba.
Setting SCGHG_DISABLE_JIT=1 (or running without numba installed) routes all
kernel calls to the vectorized numpy implementations instead.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

if numba is not None and "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe, which warns on older system TBB builds
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_FALSY = {"", "0", "false", "no", "off"}


def jit_disabled() -> bool:
    return os.environ.get("SCGHG_DISABLE_JIT", "").strip().lower() not in _FALSY


def numba_available() -> bool:
    return numba is not None


def resolve_backend(backend: str = "auto") -> str:
    """Map 'auto' | 'numba' | 'numpy' to the backend that will actually run."""
    if backend not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numpy":
        return "numpy"
    if backend == "numba":
        if numba is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return "numba"
    return "numpy" if (numba is None or jit_disabled()) else "numba"


def lazy_njit(func=None, *, parallel=False):
    """Compile `func` with numba on first call; keep the Python version reachable.

    fastmath stays off so results do not depend on vectorization choices,
    which keeps outputs identical across thread counts.
    """
    if func is None:
        return lambda f: lazy_njit(f, parallel=parallel)
    state = {}

    def compiled(*args):
        fn = state.get("fn")
        if fn is None:
            fn = numba.njit(cache=True, fastmath=False, parallel=parallel)(func)
            state["fn"] = fn
        return fn(*args)

    compiled.py_func = func
    compiled.__name__ = func.__name__
    compiled.__doc__ = func.__doc__
    return compiled
