"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The backend is chosen once, at import time. Set EPFCAST_KERNELS to force
a choice:

* ``auto`` (default): use the compiled extension when importable,
  otherwise fall back to the numpy reference implementation.
* ``compiled``: require the extension; raise ImportError if missing.
* ``reference``: always use the numpy implementation.

Both backends expose identical signatures and dtypes, so everything
above this module is backend-agnostic.
"""

import os

from . import reference as _reference

_MODE = os.environ.get("EPFCAST_KERNELS", "auto").strip().lower()
if _MODE not in ("auto", "compiled", "reference"):
    raise ValueError(
        "EPFCAST_KERNELS must be one of 'auto', 'compiled', 'reference'; "
        f"got {_MODE!r}"
    )

_impl = None
_BACKEND = "reference"
if _MODE in ("auto", "compiled"):
    try:
        from . import _core as _impl
        _BACKEND = "compiled"
    except ImportError:
        if _MODE == "compiled":
            raise ImportError(
                "EPFCAST_KERNELS=compiled but the compiled kernel extension "
                "is not available; build it with 'pip install -e .'"
            )
        _impl = None
if _impl is None:
    _impl = _reference


def active_backend() -> str:
    """Name of the backend in use: 'compiled' or 'reference'."""
    return _BACKEND


sigmoid = _reference.sigmoid  # cheap enough that numpy always serves
conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
maxpool1d_forward = _impl.maxpool1d_forward
maxpool1d_backward = _impl.maxpool1d_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
rnn_forward = _impl.rnn_forward
rnn_backward = _impl.rnn_backward

__all__ = [
    "active_backend",
    "sigmoid",
    "conv1d_forward",
    "conv1d_backward",
    "maxpool1d_forward",
    "maxpool1d_backward",
    "lstm_forward",
    "lstm_backward",
    "rnn_forward",
    "rnn_backward",
]
