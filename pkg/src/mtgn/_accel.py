"""Backend selection for the hot numeric kernels.

The numba path is used when numba imports cleanly and ``MTGN_DISABLE_NUMBA``
is unset (or ``0``). Setting ``MTGN_DISABLE_NUMBA=1`` forces the pure-numpy
path. ``MTGN_THREADS`` caps the numba worker count.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSEY


try:
    import numba

    HAVE_NUMBA = True
    # the system TBB is too old for numba; skip straight to omp/workqueue
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag("MTGN_DISABLE_NUMBA")


def configure_threads():
    """Apply ``MTGN_THREADS`` to numba, returning the active worker count."""
    if not HAVE_NUMBA:
        return 1
    cap = os.environ.get("MTGN_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    return wrap


prange = numba.prange if HAVE_NUMBA else range
