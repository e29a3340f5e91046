"""Small dense complex linear algebra and numerical helpers."""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DimensionError",
    "as_matrix",
    "det",
    "BranchTracker",
    "sqrt_continuous",
    "finite_difference_jacobian",
    "DEFAULT_FD_STEP",
]

DEFAULT_FD_STEP = 1e-6


class DimensionError(ValueError):
    """Raised on shape mismatches (non-square matrices, different spin sizes)."""


def as_matrix(m) -> np.ndarray:
    """Convert ``m`` to a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def det(m) -> complex:
    """
    Determinant of a small complex matrix.

    Sizes 1 and 2 use the closed forms; larger matrices use LU
    factorisation with partial pivoting.

    Parameters
    ----------
    m : array_like (n, n)
        complex matrix, n <= 8 in practice

    Returns
    -------
    complex
    """
    a = as_matrix(m).copy()
    n, k = a.shape
    if n != k:
        raise DimensionError(f"determinant of a non-square {n}x{k} matrix")
    if n == 0:
        return 1.0 + 0.0j
    if n == 1:
        return complex(a[0, 0])
    if n == 2:
        return complex(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])

    result = 1.0 + 0.0j
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if a[pivot, col] == 0:
            return 0.0j
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            result = -result
        result *= a[col, col]
        factors = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= np.outer(factors, a[col, col:])
    return complex(result)


@dataclass
class BranchTracker:
    """
    Memory for continuous square-root branch selection.

    One tracker per continuation path; not shared between threads.
    """

    previous: complex = 0j
    initialized: bool = False
    degenerate: bool = False

    def reset(self) -> None:
        self.previous = 0j
        self.initialized = False
        self.degenerate = False


def sqrt_continuous(z: complex, tracker: BranchTracker) -> complex:
    """
    Square root of ``z`` closest to the tracker's previous output.

    The first call returns the principal root. A zero argument on an
    uninitialised tracker returns 0 and marks the tracker degenerate
    without initialising it.
    """
    z = complex(z)
    root = cmath.sqrt(z)
    if not tracker.initialized:
        if z == 0:
            tracker.degenerate = True
            return 0j
        tracker.previous = root
        tracker.initialized = True
        tracker.degenerate = False
        return root
    if abs(root - tracker.previous) > abs(-root - tracker.previous):
        root = -root
    tracker.previous = root
    return root


def finite_difference_jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    x0,
    h: float | None = None,
) -> np.ndarray:
    """
    Central-difference complex Jacobian of ``f`` at ``x0``.

    Each input component is stepped along the real and the imaginary
    direction; the two difference quotients are combined into the
    Wirtinger derivative ``(d/dx - i d/dy) / 2``, which equals the complex
    derivative for holomorphic maps.

    Parameters
    ----------
    f : callable
        maps a complex vector of length n to a complex vector of length m
    x0 : array_like (n,)
    h : float, optional
        base step, scaled by ``max(1, |x0|)``; default 1e-6

    Returns
    -------
    jac : complex ndarray (m, n)
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
    if h is None:
        h = DEFAULT_FD_STEP
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    step = h * max(1.0, float(np.max(np.abs(x0))) if x0.size else 1.0)

    columns = []
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = step
        d_re = (np.atleast_1d(f(x0 + e)) - np.atleast_1d(f(x0 - e))) / (2 * step)
        d_im = (np.atleast_1d(f(x0 + 1j * e)) - np.atleast_1d(f(x0 - 1j * e))) / (2 * step)
        columns.append(0.5 * (np.asarray(d_re, dtype=complex) - 1j * np.asarray(d_im, dtype=complex)))
    return np.column_stack(columns)
