"""Kernel backend selection.

The compiled extension is used when it imports cleanly; set
``AGVSCHED_PURE_PYTHON=1`` to force the pure-Python kernels.
"""

import importlib
import os

_FORCE_PY = os.environ.get("AGVSCHED_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}


def load(name):
    """Import a kernel module by backend name (``"compiled"`` or ``"python"``)."""
    mod = {"compiled": "agvsched._ckernels", "python": "agvsched._pykernels"}[name]
    return importlib.import_module(mod)


def available():
    names = ["python"]
    try:
        load("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


if _FORCE_PY:
    kernels = load("python")
else:
    try:
        kernels = load("compiled")
    except ImportError:
        kernels = load("python")

BACKEND = kernels.BACKEND_NAME
