import os
import sys

# locate the in-tree extension and package when running against a CMake build
for var in ("NLSPEC_PKG_DIR", "NLSPEC_EXT_DIR"):
    path = os.environ.get(var)
    if path and path not in sys.path:
        sys.path.insert(0, path)
