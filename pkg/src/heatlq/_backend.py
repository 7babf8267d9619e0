"""Select the path-stepping kernels at import time.

``HEATLQ_BACKEND=python`` forces the numpy implementation,
``HEATLQ_BACKEND=cython`` requires the compiled one; the default uses the
compiled kernels when they were built.
"""
import importlib
import os

_choice = os.environ.get("HEATLQ_BACKEND", "auto").lower()


def load(name: str):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "cython":
        return importlib.import_module("heatlq._kernels")
    if name == "python":
        return importlib.import_module("heatlq._kernels_py")
    raise ValueError(f"unknown backend {name!r}")


if _choice == "python":
    kernels, NAME = load("python"), "python"
elif _choice == "cython":
    kernels, NAME = load("cython"), "cython"
else:
    try:
        kernels, NAME = load("cython"), "cython"
    except ImportError:
        kernels, NAME = load("python"), "python"


def available() -> list[str]:
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def resolve(backend):
    """Kernel module for ``backend``: None (the import-time choice), a name, or a module."""
    if backend is None:
        return kernels
    if isinstance(backend, str):
        return load(backend)
    return backend
