"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise (or when the
environment variable ``ORPF_PURE_PYTHON`` is set to a non-empty value other
than ``0``) the pure-Python fallback is used. Both expose the same functions.
"""

import os

from . import _fallback

OK = _fallback.OK
NOT_CONVERGED = _fallback.NOT_CONVERGED
ZERO_VOLTAGE = _fallback.ZERO_VOLTAGE
DIVERGED = _fallback.DIVERGED


def _load_compiled():
    if os.environ.get("ORPF_PURE_PYTHON", "0") not in ("", "0"):
        return None
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback

zbus_fixed_point = _impl.zbus_fixed_point
gossip_model_ensemble = _impl.gossip_model_ensemble


def backends():
    """Mapping of available backend name to module, for benchmarks and tests."""
    found = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["compiled"] = _kernels
    return found
