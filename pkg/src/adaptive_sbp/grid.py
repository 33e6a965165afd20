"""Uniform multiblock grids with duplicated interface points."""

from dataclasses import dataclass

import numpy as np

from .operators import MIN_N


@dataclass(frozen=True)
class BlockGrid:
    """``K`` blocks of ``N + 1`` points each covering ``[x_left, x_right]``.

    The last point of block ``k`` and the first point of block ``k + 1``
    share a coordinate.
    """

    K: int
    N: int
    x_left: float = 0.0
    x_right: float = 1.0

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError(f"need at least one block, got K={self.K}")
        if self.N < MIN_N:
            raise ValueError(f"need N >= {MIN_N}, got N={self.N}")
        if not self.x_right > self.x_left:
            raise ValueError("empty domain")

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @property
    def dx(self) -> float:
        return self.length / (self.K * self.N)

    def block_origin(self, k: int) -> float:
        return self.x_left + k * self.N * self.dx

    def block_coords(self, k: int) -> np.ndarray:
        return self.x_left + (k * self.N + np.arange(self.N + 1)) * self.dx

    @property
    def coords(self) -> np.ndarray:
        """Array of shape ``(K, N + 1)``."""
        i = np.arange(self.N + 1)
        k = np.arange(self.K)[:, None]
        return self.x_left + (k * self.N + i) * self.dx
