"""Learning image classifiers under class-conditional label noise.

The heavy lifting lives in the compiled extension `_core`; this package
re-exports its public surface. When working from a build tree (no installed
wheel), point NOISYLAB_EXT_DIR at the directory containing the extension.
"""

try:
    from noisylab._core import *  # noqa: F401,F403
    from noisylab._core import __version__  # noqa: F401
except ImportError:
    import os
    import sys

    _ext_dir = os.environ.get("NOISYLAB_EXT_DIR")
    if not _ext_dir:
        raise
    if _ext_dir not in sys.path:
        sys.path.insert(0, _ext_dir)
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
