"""Backend selection for the per-round array kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation. Set ``PSFPC_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("PSFPC_BACKEND", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

mix_push_sum = _impl.mix_push_sum
mix_average = _impl.mix_average
prior_covariance = _impl.prior_covariance
filter_round = _impl.filter_round

__all__ = ["BACKEND", "mix_push_sum", "mix_average", "prior_covariance", "filter_round"]
