"""Multispecies occupancy modelling from camera-trap image labels.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public surface.
"""

try:  # packaged layout: extension installed inside the package
    from . import _core as _impl
    from ._core import *  # noqa: F401,F403
except ImportError:  # development layout: extension directly on sys.path
    import _core as _impl
    from _core import *  # noqa: F401,F403

__all__ = [name for name in dir(_impl) if not name.startswith("_")]
__version__ = "1.0.0"
