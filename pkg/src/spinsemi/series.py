"""Container for entropy time series shared by the quantum and semiclassical paths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EntropySeries:
    """
    Linear entropy sampled on a grid of dimensionless times.

    ``semiclassical`` may be complex; its imaginary part measures how well
    conjugate sets pair up. ``breakdown`` maps a branch id to its complex
    contribution on the grid (NaN where the branch is absent or filtered),
    ``branches`` holds the per-branch log (tau, x1A, value, reason).
    """

    tau: np.ndarray
    exact: np.ndarray | None = None
    semiclassical: np.ndarray | None = None
    n_active: np.ndarray | None = None
    breakdown: dict[str, np.ndarray] = field(default_factory=dict)
    filtered: dict[str, list[str]] = field(default_factory=dict)
    branches: dict[str, dict] = field(default_factory=dict)

    def sup_error(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """max |S_sc - S_exact| over lo <= tau <= hi."""
        if self.exact is None or self.semiclassical is None:
            raise ValueError("both columns are needed for a comparison")
        mask = (self.tau >= lo) & (self.tau <= hi)
        return float(np.max(np.abs(self.semiclassical[mask].real - self.exact[mask])))
