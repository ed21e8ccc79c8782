"""Kernel backend selection.

The compiled extension is used when it imports; setting ``SATLINK_PURE_PYTHON=1``
forces the pure-Python kernel. Both backends return identical results.
"""

import os

from . import _sic_py

BACKENDS = {"python": _sic_py.decode_blocks}

try:
    from . import _sic_ext
except ImportError:  # extension not built
    _sic_ext = None
else:
    BACKENDS["cython"] = _sic_ext.decode_blocks

if os.environ.get("SATLINK_PURE_PYTHON") or "cython" not in BACKENDS:
    BACKEND = "python"
else:
    BACKEND = "cython"

decode_blocks = BACKENDS[BACKEND]
