"""Hot kernels with a compiled backend and a pure-numpy fallback.

The compiled extension is used when it was built and imports cleanly.  Set
``IRS6D_PURE_PYTHON=1`` to force the numpy fallback.

Kernels
-------
corr_grid
    Normalised correlation of a factor vector against a UPA steering family
    over a rectangular frequency grid.
als_rank1
    Rank-1 alternating least squares on a third-order complex tensor.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("IRS6D_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

corr_grid = _impl.corr_grid
als_rank1 = _impl.als_rank1


def backends():
    """Mapping of available backend names to their kernel modules."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
