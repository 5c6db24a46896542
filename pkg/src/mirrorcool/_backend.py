"""Backend selection: numba-compiled kernels or the pure-numpy fallback.

``MIRRORCOOL_BACKEND=numpy`` forces the fallback; ``numba`` (the default when
numba imports) uses the compiled kernels.
"""

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAS_NUMBA = False

ENV_FLAG = "MIRRORCOOL_BACKEND"


def resolve(name: str | None = None) -> str:
    name = (name or os.environ.get(ENV_FLAG) or ("numba" if HAS_NUMBA else "numpy")).lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise ValueError("numba backend requested but numba is not installed")
    return name


def set_workers(n: int | None) -> None:
    """Cap the number of threads used by the compiled kernels."""
    if n is None or not HAS_NUMBA:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
