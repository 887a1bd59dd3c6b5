try:
    from ._mfoc import *  # noqa: F401,F403
except ImportError:  # development layout: extension on sys.path, not in the package
    from _mfoc import *  # noqa: F401,F403
