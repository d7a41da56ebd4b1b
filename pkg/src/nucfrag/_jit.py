"""Backend switch for the hot kernels.

Set ``NUCFRAG_PURE_NUMPY=1`` before import to run every kernel as plain
Python over numpy arrays. Both backends draw from the same MT19937 stream,
so a given seed yields bit-identical trajectories on either path.
"""
import os

PURE_NUMPY = os.environ.get("NUCFRAG_PURE_NUMPY", "").strip().lower() not in ("", "0", "false", "no")

if PURE_NUMPY:

    def jit(fn):
        return fn

    BACKEND = "numpy"
else:
    import numba

    jit = numba.njit(cache=True)
    BACKEND = "numba"


if PURE_NUMPY:
    jit_inline = jit
else:
    # small helpers called per event; inlining avoids per-call array refcounting
    jit_inline = numba.njit(cache=True, inline="always")
