"""Episode-kernel backend selection.

The compiled Cython kernels are used when importable; the vectorized numpy
module is the fallback. COORDEX_BACKEND=numpy or =cython forces the choice
(forcing cython raises if the extension is missing). Both backends are
deterministic and consume the RNG streams identically, but they are not
bit-identical to each other; a run's backend is part of its reproducibility
context.
"""

from __future__ import annotations

import os

from . import _kernels_py
from .learn import CenteringMode

_forced = os.environ.get("COORDEX_BACKEND", "")
if _forced == "numpy":
    kernels = _kernels_py
elif _forced == "cython":
    from . import _kernels as kernels
elif _forced:
    raise ImportError(f"COORDEX_BACKEND={_forced!r} (want 'numpy' or 'cython')")
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py

_MODE_CODES = {
    CenteringMode.TWO_SIDED: _kernels_py.MODE_TWO_SIDED,
    CenteringMode.ONE_SIDED_ACTION: _kernels_py.MODE_ONE_SIDED_ACTION,
    CenteringMode.ONE_SIDED_REWARD: _kernels_py.MODE_ONE_SIDED_REWARD,
}


def backend_name() -> str:
    return kernels.BACKEND_NAME


def mode_code(mode: CenteringMode) -> int:
    return _MODE_CODES[mode]
