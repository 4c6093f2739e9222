"""Kernel engine selection.

The hot loops (beam field assembly, residual assembly, leapfrog reference
stepping, semi-Lagrangian interpolation) have two interchangeable
implementations: numba-jitted (default) and pure numpy.  Set HFBEAM_NO_NUMBA=1
to force the numpy path; HFBEAM_THREADS=k caps the numba thread pool.
Within one engine, results are bitwise deterministic; across engines they may
differ by roundoff in the last bits.
"""
from __future__ import annotations

import os

from . import _kernels_numpy

_flag = os.environ.get("HFBEAM_NO_NUMBA", "").strip().lower()
_want_numba = _flag in ("", "0", "false")

_impl = _kernels_numpy
ENGINE = "numpy"

if _want_numba:
    try:
        import numba

        threads = os.environ.get("HFBEAM_THREADS", "").strip()
        if threads:
            numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
        from . import _kernels_numba as _impl_numba

        _impl = _impl_numba
        ENGINE = "numba"
    except ImportError:
        pass

field_sum = _impl.field_sum
residual_sum = _impl.residual_sum
leapfrog = _impl.leapfrog
cubic_gather_2d = _impl.cubic_gather_2d

# cutoff helpers always come from the numpy module (cheap, reused in python code)
smooth_step = _kernels_numpy.smooth_step
smooth_step_d1 = _kernels_numpy.smooth_step_d1
smooth_step_d2 = _kernels_numpy.smooth_step_d2
cutoff = _kernels_numpy.cutoff
residual_coeffs_eval = _kernels_numpy.residual_coeffs_eval


def engine() -> str:
    """Name of the active kernel engine ('numba' or 'numpy')."""
    return ENGINE
