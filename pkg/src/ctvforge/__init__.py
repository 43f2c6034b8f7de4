"""ctvforge: spatial-context encoded CTV delineation at desk scale."""

import os as _os

# CTVFORGE_THREADS caps worker threads (BLAS pools included). Must take
# effect before numpy initializes, hence here at package import.
_threads = _os.environ.get("CTVFORGE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .backends import BACKEND, HAVE_COMPILED  # noqa: E402
from .voxgrid import MaskVolume, Spacing, VolumeGrid, read_svox, write_svox  # noqa: E402

__version__ = "0.1.0"
