"""Hot numerical kernels with a compiled backend and a pure-Python fallback.

The compiled extension (``_ext``, built from Cython) is used when importable.
Set ``SPECDEMAND_PURE=1`` to force the fallback.  Both backends expose the
same names and follow the same tie-breaking rules; results agree to
floating-point summation order.
"""
import os

from . import _pure

BACKEND = "pure"

if os.environ.get("SPECDEMAND_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ext as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pure
else:
    _impl = _pure

segment_box_length = _impl.segment_box_length
polygon_box_area = _impl.polygon_box_area
Presort = _impl.Presort
predict_tree = _impl.predict_tree

__all__ = ["BACKEND", "segment_box_length", "polygon_box_area", "Presort", "predict_tree"]


def backend(name):
    """Return the kernel module for ``name`` ("pure" or "cython")."""
    if name == "pure":
        return _pure
    if name == "cython":
        from . import _ext
        return _ext
    raise ValueError(f"unknown backend {name!r}")


def use(name):
    """Switch the active backend process-wide; returns the previous name."""
    global BACKEND, segment_box_length, polygon_box_area, Presort, predict_tree
    impl = backend(name)
    previous = BACKEND
    BACKEND = name
    segment_box_length = impl.segment_box_length
    polygon_box_area = impl.polygon_box_area
    Presort = impl.Presort
    predict_tree = impl.predict_tree
    return previous


def available():
    """Names of the importable backends."""
    names = ["pure"]
    try:
        from . import _ext  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names
