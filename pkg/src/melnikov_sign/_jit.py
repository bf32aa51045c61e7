"""Backend switch between numba-compiled kernels and the plain Python path.

Set ``MELNIKOV_NUMBA=0`` before import to run every kernel as ordinary
Python (numpy + math).  The kernel source is identical in both modes.
"""
import os

try:
    import numba
    from numba import types as _nbtypes
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_flag = os.environ.get("MELNIKOV_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn=None, **kwargs):
    """``numba.njit`` when the numba backend is active, identity otherwise."""
    if fn is None:
        return lambda f: njit(f, **kwargs)
    if not USE_NUMBA:
        return fn
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(**kwargs)(fn)


if USE_NUMBA:
    PERTURBATION_SIG = _nbtypes.float64(_nbtypes.float64, _nbtypes.float64, _nbtypes.float64)
    INTEGRAND_SIG = _nbtypes.float64(_nbtypes.float64, _nbtypes.float64[::1])
else:
    PERTURBATION_SIG = INTEGRAND_SIG = None


def as_kernel_callable(py_fn, sig):
    """Wrap a generated Python function so the kernels can call it.

    Under numba the result is a ``cfunc`` whose first-class function type is
    shared by every perturbation, so the kernels compile once per process.
    """
    if not USE_NUMBA:
        return py_fn
    return numba.cfunc(sig, nogil=True, error_model="numpy")(numba.njit(py_fn, error_model="numpy"))


def jit_inline(py_fn):
    """Compile ``py_fn`` for use as a global inside other generated code."""
    if not USE_NUMBA:
        return py_fn
    return numba.njit(nogil=True, error_model="numpy")(py_fn)


def pyfunc(fn):
    """Pure-Python body of a kernel (for arbitrary Python callables)."""
    return getattr(fn, "py_func", fn)
