"""Backend selection: compiled kernels when available, pure Python otherwise.

The ``HT_OPT_BACKEND`` environment variable forces a choice: "compiled",
"pure", or "auto" (default).  Both backends implement the same functions and
produce bit-identical trajectories.
"""

import os

from . import _pykernels

_COMPILED = None
_IMPORT_ERROR = None
try:
    from . import _kernels as _COMPILED  # noqa: F401
except ImportError as exc:  # extension not built
    _IMPORT_ERROR = exc


def load_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "pure":
        return _pykernels
    if name == "compiled":
        if _COMPILED is None:
            raise ImportError(
                f"compiled kernels unavailable ({_IMPORT_ERROR}); "
                "build with 'pip install -e . --no-build-isolation'"
            )
        return _COMPILED
    raise ValueError(f"unknown backend {name!r} (expected 'compiled' or 'pure')")


def _select():
    choice = os.environ.get("HT_OPT_BACKEND", "auto").lower()
    if choice == "auto":
        return _COMPILED if _COMPILED is not None else _pykernels
    return load_backend(choice)


_ACTIVE = _select()


def kernels():
    """The active kernel module."""
    return _ACTIVE


def backend_name() -> str:
    return "compiled" if _ACTIVE is _COMPILED and _COMPILED is not None else "pure"


def compiled_available() -> bool:
    return _COMPILED is not None
