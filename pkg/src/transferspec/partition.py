"""Rectangular box partition of the planar reduced state space.

Boxes are half open, ``[lo + k*w, lo + (k+1)*w)`` per dimension, with the
global upper boundary excluded, so every in-domain point belongs to
exactly one box.  Flat indices are row-major: ``i = ix + n1 * iy``.
Samples outside the domain are dropped, not clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, EmptyDomainError, ValidationError
from .hopf import Trajectory

__all__ = [
    "GridSpec",
    "SojournDensity",
    "StandardizeParams",
    "standardize",
    "locate",
    "locate_many",
    "sojourn_density",
]


@dataclass(frozen=True)
class GridSpec:
    lo: tuple[float, float]
    hi: tuple[float, float]
    n_per_dim: tuple[int, int]

    def __post_init__(self):
        lo = (float(self.lo[0]), float(self.lo[1]))
        hi = (float(self.hi[0]), float(self.hi[1]))
        n = (int(self.n_per_dim[0]), int(self.n_per_dim[1]))
        if not all(math.isfinite(v) for v in (*lo, *hi)):
            raise ValidationError("grid bounds must be finite")
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ValidationError(f"grid requires lo < hi componentwise, got {lo}, {hi}")
        if n[0] < 1 or n[1] < 1:
            raise ValidationError(f"n_per_dim must be >= 1, got {n}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n_per_dim", n)

    @property
    def n_boxes(self) -> int:
        return self.n_per_dim[0] * self.n_per_dim[1]

    @property
    def widths(self) -> tuple[float, float]:
        return (
            (self.hi[0] - self.lo[0]) / self.n_per_dim[0],
            (self.hi[1] - self.lo[1]) / self.n_per_dim[1],
        )

    def box_centers(self) -> np.ndarray:
        """Centers of all boxes in flat row-major order, shape (M, 2)."""
        wx, wy = self.widths
        cx = self.lo[0] + wx * (np.arange(self.n_per_dim[0]) + 0.5)
        cy = self.lo[1] + wy * (np.arange(self.n_per_dim[1]) + 0.5)
        gx, gy = np.meshgrid(cx, cy)  # gy varies along rows: flat index ix + n1*iy
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class SojournDensity:
    """Normalized box-occupancy histogram over the full partition."""

    values: np.ndarray = field(repr=False)
    n_samples_in_domain: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if np.any(v < 0):
            raise ValidationError("density values must be nonnegative")
        if self.n_samples_in_domain > 0 and abs(v.sum() - 1.0) > 1e-12:
            raise ValidationError("density must sum to 1")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class StandardizeParams:
    """Affine map parameters: standardized = (raw - mean) / std."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, states: np.ndarray) -> np.ndarray:
        return (states - self.mean) / self.std

    def invert(self, states: np.ndarray) -> np.ndarray:
        return states * self.std + self.mean


def standardize(traj: Trajectory) -> tuple[Trajectory, StandardizeParams]:
    """Rescale to zero mean and unit (population) standard deviation per dimension."""
    states = traj.states
    mean = states.mean(axis=0)
    std = states.std(axis=0)
    if np.any(std < 1e-14):
        raise DegenerateVarianceError(
            f"per-dimension std {std} too small to standardize"
        )
    params = StandardizeParams(mean=mean, std=std)
    return Trajectory(traj.sampling_interval, params.apply(states)), params


def locate_many(grid: GridSpec, states: np.ndarray) -> np.ndarray:
    """Flat box indices for an (N, 2) array of points; -1 for out-of-domain."""
    states = np.asarray(states, dtype=np.float64)
    lo = np.array(grid.lo)
    hi = np.array(grid.hi)
    n = np.array(grid.n_per_dim)
    w = (hi - lo) / n
    inside = np.all((states >= lo) & (states < hi), axis=1)
    ij = np.floor((states - lo) / w).astype(np.int64)
    # guard the 1-ulp case where division rounds a near-boundary point up
    np.clip(ij, 0, n - 1, out=ij)
    idx = ij[:, 0] + n[0] * ij[:, 1]
    idx[~inside] = -1
    return idx


def locate(grid: GridSpec, point) -> int | None:
    """Flat index of the box containing ``point``, or None if outside the domain."""
    idx = locate_many(grid, np.asarray(point, dtype=np.float64).reshape(1, 2))[0]
    return None if idx < 0 else int(idx)


def sojourn_density(grid: GridSpec, traj: Trajectory) -> SojournDensity:
    """Relative occupancy of each box by the trajectory samples.

    Out-of-domain samples are excluded from numerator and denominator.
    """
    idx = locate_many(grid, traj.states)
    inside = idx[idx >= 0]
    if inside.size == 0:
        raise EmptyDomainError("no trajectory sample falls inside the partition domain")
    counts = np.bincount(inside, minlength=grid.n_boxes)
    values = counts / inside.size
    return SojournDensity(values=values, n_samples_in_domain=int(inside.size))
