"""Kernel backend selection.

The compiled Cython extension is used when it has been built; otherwise the
numpy fallback in ``_kernels_py`` is loaded. Set ``SPLITKIT_PURE_PYTHON=1``
to force the fallback (the test-suite does this to cross-check both).
"""

import os

if os.environ.get("SPLITKIT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND

q_mul_vec = _impl.q_mul_vec
q_add_vec = _impl.q_add_vec
q_matvec = _impl.q_matvec
q_trisolve = _impl.q_trisolve
cholesky = _impl.cholesky
trisolve = _impl.trisolve
jacobi_eigvals = _impl.jacobi_eigvals

__all__ = [
    "BACKEND", "q_mul_vec", "q_add_vec", "q_matvec", "q_trisolve",
    "cholesky", "trisolve", "jacobi_eigvals",
]
