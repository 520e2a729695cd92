"""Uniform periodic spatial grids and truncated trait grids, with midpoint quadrature."""

from __future__ import annotations

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True)
class TorusGrid:
    """Cell-centered uniform grid on the periodic box [0, period)^dim.

    The same 1-D layout is used along every axis; cell centers sit at
    (i + 1/2) * spacing, so all centers lie strictly inside [0, period).
    """

    dim: int
    points_per_dim: int
    period: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.points_per_dim < 4:
            raise ValueError(
                f"too few points per dimension: {self.points_per_dim} (need >= 4)"
            )
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def spacing(self) -> float:
        return self.period / self.points_per_dim

    @property
    def centers(self) -> np.ndarray:
        """1-D cell centers (shared by both axes when dim == 2)."""
        return self.spacing * (np.arange(self.points_per_dim) + 0.5)

    @property
    def n_cells(self) -> int:
        return self.points_per_dim**self.dim

    def wrap_index(self, i):
        """Periodic index arithmetic: i + points_per_dim wraps back to i."""
        return np.asarray(i) % self.points_per_dim

    def distance(self, a, b):
        """Shortest periodic distance per coordinate, always <= period / 2."""
        d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        d = d % self.period
        return np.minimum(d, self.period - d)


@dataclasses.dataclass(frozen=True)
class TraitGrid:
    """Cell-centered uniform grid on the truncated trait interval [y_min, y_max].

    Truncation is admissible when the interval extends at least 8 standard
    deviations beyond every profile it has to carry; mass escaping past the
    ends is monitored by the solvers, never renormalized away.
    """

    y_min: float
    y_max: float
    points: int

    def __post_init__(self):
        if not self.y_min < self.y_max:
            raise ValueError(
                f"trait bounds must satisfy y_min < y_max, got [{self.y_min}, {self.y_max}]"
            )
        if self.points < 16:
            raise ValueError(f"too few trait points: {self.points} (need >= 16)")

    @property
    def spacing(self) -> float:
        return (self.y_max - self.y_min) / self.points

    @property
    def centers(self) -> np.ndarray:
        return self.y_min + self.spacing * (np.arange(self.points) + 0.5)

    @property
    def edges(self) -> np.ndarray:
        return self.y_min + self.spacing * np.arange(self.points + 1)

    def integrate(self, values) -> float:
        """Midpoint quadrature of cell-center samples: spacing * sum(values).

        Exact for affine integrands; linear in the samples.
        """
        values = np.asarray(values, dtype=float)
        if values.shape != (self.points,):
            raise ValueError(
                f"expected {self.points} samples on this grid, got shape {values.shape}"
            )
        return float(self.spacing * values.sum())


def make_torus_grid(dim: int, points_per_dim: int, period: float = 1.0) -> TorusGrid:
    return TorusGrid(dim, points_per_dim, float(period))


def make_trait_grid(y_min: float, y_max: float, points: int) -> TraitGrid:
    return TraitGrid(float(y_min), float(y_max), points)
