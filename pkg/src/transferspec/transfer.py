"""Estimation of the reduced Markov operator from a trajectory.

Orientation convention, used everywhere in this package: transition
matrices are column stochastic and act on densities from the left,
``p_next = T @ p``.  Entry ``T[i, j]`` is the estimated probability of
moving from box ``j`` to box ``i`` over the lag.  The transpose action
``T.T @ f`` propagates observables.

Boxes without outgoing transitions are removed and the matrix is
restricted to the surviving ``kept_boxes`` index set (padding empty
columns with self loops would inject spurious unit eigenvalues).  Counts
are kept in 64-bit integers, probabilities in double precision, and the
sparse probabilities are stored in compressed column-major layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import LagTooLongError, ValidationError, ZeroMassError
from .hopf import Trajectory
from .partition import GridSpec, SojournDensity, locate_many

__all__ = [
    "TransitionCounts",
    "TransitionMatrix",
    "count_transitions",
    "normalize",
    "normalize_on",
    "common_kept_boxes",
    "restrict_density",
]


@dataclass(frozen=True)
class TransitionCounts:
    """Sparse integer transition counts from box ``col`` to box ``row``."""

    lag_steps: int
    n_boxes: int
    sampling_interval: float
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    n_pairs: int = 0

    def __post_init__(self):
        for name in ("rows", "cols", "counts"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if np.any(self.counts < 0):
            raise ValidationError("transition counts must be nonnegative")
        if int(self.counts.sum()) != self.n_pairs:
            raise ValidationError("count total must equal the number of admissible pairs")

    @property
    def lag(self) -> float:
        return self.lag_steps * self.sampling_interval

    def matrix(self) -> sparse.csc_array:
        """Counts as a sparse M x M integer matrix."""
        return sparse.coo_array(
            (self.counts, (self.rows, self.cols)), shape=(self.n_boxes, self.n_boxes)
        ).tocsc()


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic transition probabilities on the kept boxes."""

    lag: float
    kept_boxes: np.ndarray = field(repr=False)
    matrix: sparse.csc_array = field(repr=False)

    def __post_init__(self):
        kept = np.asarray(self.kept_boxes, dtype=np.int64)
        if np.any(np.diff(kept) <= 0):
            raise ValidationError("kept_boxes must be strictly increasing")
        object.__setattr__(self, "kept_boxes", kept)
        mat = self.matrix
        if mat.shape[0] != mat.shape[1] or mat.shape[0] != kept.size:
            raise ValidationError("matrix must be square over kept_boxes")
        data = mat.data
        if data.size and (data.min() < 0 or data.max() > 1 + 1e-12):
            raise ValidationError("probabilities must lie in [0, 1]")
        colsums = np.asarray(mat.sum(axis=0)).ravel()
        if np.max(np.abs(colsums - 1.0)) > 1e-12:
            raise ValidationError("every column must sum to 1 within 1e-12")

    @property
    def dim(self) -> int:
        return self.kept_boxes.size

    def apply_density(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p

    def apply_observable(self, f: np.ndarray) -> np.ndarray:
        return self.matrix.T @ f


def count_transitions(
    grid: GridSpec, traj: Trajectory, lag_steps: int, shards: int = 1
) -> TransitionCounts:
    """Count sample pairs ``(Y_n, Y_{n+lag_steps})`` with both endpoints in-domain.

    ``shards`` splits the pair index range and merges the per-shard
    histograms; the merge is exact integer arithmetic, so the result is
    identical to a sequential count.
    """
    n = len(traj)
    if lag_steps < 1 or lag_steps >= n:
        raise ValidationError(
            f"lag_steps must satisfy 1 <= lag < trajectory length, got {lag_steps} of {n}"
        )
    idx = locate_many(grid, traj.states)
    src = idx[:-lag_steps]
    dst = idx[lag_steps:]
    valid = (src >= 0) & (dst >= 0)
    return _counts_from_pairs(grid, src, dst, valid, lag_steps, traj.sampling_interval, shards)


def count_transitions_excluding(
    grid: GridSpec,
    traj: Trajectory,
    lag_steps: int,
    exclude: tuple[int, int],
) -> TransitionCounts:
    """Counts with every pair touching sample range ``[start, stop)`` excluded.

    Used by the leave-one-block-out robustness check; deletion is by
    contiguous block, and pairs spanning the gap are dropped rather than
    stitched across it.
    """
    n = len(traj)
    if lag_steps < 1 or lag_steps >= n:
        raise ValidationError("lag_steps must satisfy 1 <= lag < trajectory length")
    start, stop = exclude
    idx = locate_many(grid, traj.states)
    src = idx[:-lag_steps]
    dst = idx[lag_steps:]
    pos = np.arange(n - lag_steps)
    in_block = ((pos >= start) & (pos < stop)) | ((pos + lag_steps >= start) & (pos + lag_steps < stop))
    valid = (src >= 0) & (dst >= 0) & ~in_block
    return _counts_from_pairs(grid, src, dst, valid, lag_steps, traj.sampling_interval, 1)


def _counts_from_pairs(grid, src, dst, valid, lag_steps, sampling_interval, shards):
    m = grid.n_boxes
    keys_all = dst * m + src  # flat (row, col) key
    n_pairs_total = 0
    shard_keys = []
    shard_counts = []
    bounds = np.linspace(0, valid.size, max(1, shards) + 1).astype(np.int64)
    for a, b in zip(bounds[:-1], bounds[1:]):
        sel = valid[a:b]
        keys = keys_all[a:b][sel]
        n_pairs_total += int(sel.sum())
        uniq, cnt = np.unique(keys, return_counts=True)
        shard_keys.append(uniq)
        shard_counts.append(cnt.astype(np.int64))
    if n_pairs_total == 0:
        raise LagTooLongError(f"no admissible sample pair at lag {lag_steps}")
    keys, inverse = np.unique(np.concatenate(shard_keys), return_inverse=True)
    total = np.zeros(keys.size, dtype=np.int64)
    np.add.at(total, inverse, np.concatenate(shard_counts))
    return TransitionCounts(
        lag_steps=lag_steps,
        n_boxes=m,
        sampling_interval=sampling_interval,
        rows=keys // m,
        cols=keys % m,
        counts=total,
        n_pairs=n_pairs_total,
    )


def _kept_fixed_point(count_mat: sparse.csc_array, kept: np.ndarray) -> np.ndarray:
    """Largest subset of ``kept`` on which every restricted column keeps mass."""
    while True:
        sub = count_mat[np.ix_(kept, kept)]
        colsums = np.asarray(sub.sum(axis=0)).ravel()
        alive = colsums > 0
        if alive.all():
            return kept
        kept = kept[alive]
        if kept.size == 0:
            raise LagTooLongError("no box retains outgoing transitions after restriction")


def normalize_on(counts: TransitionCounts, kept: np.ndarray) -> TransitionMatrix:
    """Restrict counts to ``kept`` x ``kept`` and normalize each column."""
    kept = np.asarray(kept, dtype=np.int64)
    cmat = counts.matrix()
    sub = cmat[np.ix_(kept, kept)].astype(np.float64).tocsc()
    colsums = np.asarray(sub.sum(axis=0)).ravel()
    if np.any(colsums <= 0):
        raise ValidationError("kept set contains a column without outgoing count")
    scale = sparse.dia_array((1.0 / colsums[None, :], [0]), shape=(kept.size, kept.size))
    prob = (sub @ scale).tocsc()
    return TransitionMatrix(lag=counts.lag, kept_boxes=kept, matrix=prob)


def normalize(counts: TransitionCounts) -> TransitionMatrix:
    """Drop boxes without outgoing count, then column-normalize the rest."""
    cmat = counts.matrix()
    colsums = np.asarray(cmat.sum(axis=0)).ravel()
    kept = np.flatnonzero(colsums > 0).astype(np.int64)
    if kept.size == 0:
        raise ValidationError("counts contain no nonzero column")
    kept = _kept_fixed_point(cmat, kept)
    return normalize_on(counts, kept)


def common_kept_boxes(counts_a: TransitionCounts, counts_b: TransitionCounts) -> np.ndarray:
    """Joint kept set: intersection of both lags' surviving boxes, iterated to a fixed point."""
    if counts_a.n_boxes != counts_b.n_boxes:
        raise ValidationError("count matrices live on different partitions")
    mat_a = counts_a.matrix()
    mat_b = counts_b.matrix()
    kept_a = np.flatnonzero(np.asarray(mat_a.sum(axis=0)).ravel() > 0)
    kept_b = np.flatnonzero(np.asarray(mat_b.sum(axis=0)).ravel() > 0)
    kept = np.intersect1d(kept_a, kept_b).astype(np.int64)
    while True:
        if kept.size == 0:
            raise LagTooLongError("no box survives the joint restriction of both lags")
        new = _kept_fixed_point(mat_a, kept)
        new = _kept_fixed_point(mat_b, new)
        if new.size == kept.size:
            return new
        kept = new


def restrict_density(m: SojournDensity, kept_boxes: np.ndarray) -> np.ndarray:
    """Density restricted to ``kept_boxes`` and renormalized to sum 1."""
    kept = np.asarray(kept_boxes, dtype=np.int64)
    if kept.size == 0 or kept.min() < 0 or kept.max() >= m.values.size:
        raise ValidationError("kept_boxes out of range for the density")
    values = m.values[kept]
    mass = values.sum()
    if mass <= 0:
        raise ZeroMassError("restricted density carries no mass")
    return values / mass
