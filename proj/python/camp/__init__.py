"""Python surface over the CAMP core.

The compiled extension is normally installed next to this package. For
in-tree development (running pytest straight out of a CMake build), set
CAMP_MODULE_DIR to the directory holding the built `_camp` module.
"""

import os
import sys

_module_dir = os.environ.get("CAMP_MODULE_DIR")
if _module_dir and _module_dir not in sys.path:
    sys.path.insert(0, _module_dir)

try:
    from _camp import *  # noqa: F401,F403  (CAMP_MODULE_DIR path)
    from _camp import __version__  # noqa: F401
except ImportError:
    from camp._camp import *  # noqa: F401,F403  (installed wheel layout)
    from camp._camp import __version__  # noqa: F401
