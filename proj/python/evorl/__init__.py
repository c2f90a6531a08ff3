"""Scale-optimization agent on a synthetic aerial-scene environment.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from evorl._core import *  # noqa: F401,F403
from evorl import _core

__all__ = [name for name in dir(_core) if not name.startswith("_")]
__version__ = "0.1.0"
