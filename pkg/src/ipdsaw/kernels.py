"""Backend selection for the DP kernels.

The compiled extension is used when it imports; set ``IPDSAW_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["compiled"] = _ckernels

if os.environ.get("IPDSAW_PURE_PYTHON") == "1" or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"

_active = BACKENDS[BACKEND]


def forward_layer(prev, log_r, log_c, out):
    return _active.forward_layer(prev, log_r, log_c, out)


def backward_walk(layers, log_r, n_steps, area, uniforms):
    return _active.backward_walk(layers, log_r, n_steps, area, uniforms)


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active one)."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}") from None
