"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise the pure-Python
module is loaded. Set ``DIFFSTRU_BACKEND=python`` to force the fallback.
Both backends consume the generator identically, so results do not depend
on which one is active.
"""
import os

from . import _kernels_py

python_backend = _kernels_py

try:
    from . import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if os.environ.get("DIFFSTRU_BACKEND", "").lower() == "python" or compiled_backend is None:
    active = _kernels_py
else:
    active = compiled_backend

BACKEND = active.BACKEND


def get_backend(name=None):
    """Return a kernel module by name ('cython' or 'python'); None gives the active one."""
    if name is None:
        return active
    if name == "python":
        return _kernels_py
    if name == "cython":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}; expected 'cython' or 'python'")
