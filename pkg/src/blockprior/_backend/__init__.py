"""Backend selection: compiled Cython kernels when available, numpy fallback
otherwise. BLOCKPRIOR_BACKEND=python|c|auto overrides the default."""

import os


def load(name):
    if name in ("python", "pure"):
        from . import pure
        return pure, "pure"
    if name in ("c", "compiled"):
        from . import _core
        return _core, "compiled"
    if name == "auto":
        try:
            from . import _core
            return _core, "compiled"
        except ImportError:
            from . import pure
            return pure, "pure"
    raise ValueError(f"unknown backend {name!r}")


kernels, BACKEND = load(os.environ.get("BLOCKPRIOR_BACKEND", "auto").lower())
