"""Principal spectrum points of time-periodic cooperative nonlocal dispersal operators."""

try:
    from ._nlspec import *  # noqa: F401,F403  (installed layout)
    from ._nlspec import __version__  # noqa: F401
except ImportError:  # in-tree build: extension directory on sys.path
    from _nlspec import *  # noqa: F401,F403
    from _nlspec import __version__  # noqa: F401
