"""Deformation-field surface reconstruction over a sphere domain.

Thin python surface over the C++ core: mesh construction, spectral
geometry, encoders, and the scene/train/extract/eval pipeline.
"""

import os
import sys

# Development convenience: pick the extension up from a build tree when the
# package has not been installed (DEFSURF_CORE_DIR set by the test harness).
_core_dir = os.environ.get("DEFSURF_CORE_DIR")
if _core_dir and _core_dir not in sys.path:
    sys.path.insert(0, _core_dir)

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __doc__ as _core_doc  # noqa: F401
except ImportError:  # build-tree layout
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"
