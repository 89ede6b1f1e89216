"""Backend selection for the hot per-sample coding loops.

The compiled extension (Cython) implements the regular and integer-shift
coding inner loops with direct O(n^2) circular convolutions, which beats the
per-sample numpy path for the small signal lengths these groups are used at.
When the extension is missing, or for long signals where FFT-based numpy
wins, the generic pure path in `coder` is used instead.

The active backend is chosen at import time and can be overridden with
`use_backend` (the benchmark drives both).
"""

from __future__ import annotations

try:
    from . import _fastkernels

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build environment
    _fastkernels = None
    HAVE_COMPILED = False

# Above this length the FFT-based generic path beats direct convolution.
DIRECT_CONV_MAX_LEN = 64

_override: str | None = None


def use_backend(name: str | None):
    """Force 'compiled' or 'pure'; None restores automatic selection."""
    global _override
    if name not in (None, "auto", "compiled", "pure"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernels are not available in this installation")
    _override = None if name in (None, "auto") else name


def active_backend() -> str:
    if _override is not None:
        return _override
    return "compiled" if HAVE_COMPILED else "pure"


def separable_kernel(kind: str, n: int):
    """Compiled coding loop for the given group kind, or None for the generic path."""
    if active_backend() != "compiled":
        return None
    if kind == "regular":
        return _fastkernels.code_regular
    if kind == "intshift" and n <= DIRECT_CONV_MAX_LEN:
        return _fastkernels.code_intshift
    return None
