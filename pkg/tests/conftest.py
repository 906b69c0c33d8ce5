"""Shared fixtures: desk-scale pipeline runs reused across test modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

import transferspec as ts
from transferspec.eigen import filter_and_sort, leading_eigenpairs, pair_and_ratio
from transferspec.transfer import (
    common_kept_boxes,
    count_transitions,
    normalize_on,
    restrict_density,
)

DESK_GRID = ts.GridSpec((-4.5, -4.5), (4.5, 4.5), (50, 50))


@dataclass
class PipelineResult:
    params: ts.HopfParams
    sim: ts.SimConfig
    grid: ts.GridSpec
    trajectory: ts.Trajectory
    standardized: ts.Trajectory
    density: ts.SojournDensity
    kept: np.ndarray
    m: np.ndarray
    tm_a: object
    tm_b: object
    pairs_a: list
    pairs_b: list
    resonances: object  # kappa-filtered ResonanceSet
    wall_seconds: float = 0.0


def run_pipeline(params, sim, grid=DESK_GRID, tau=4.0, dtau=0.1, k=15, kappa_max=5.0):
    import time

    t_start = time.perf_counter()
    traj = ts.simulate(params, sim)
    straj, _ = ts.standardize(traj)
    interval = sim.sampling_interval
    lag_a = round(tau / interval)
    lag_b = round((tau + dtau) / interval)
    counts_a = count_transitions(grid, straj, lag_a)
    counts_b = count_transitions(grid, straj, lag_b)
    kept = common_kept_boxes(counts_a, counts_b)
    tm_a = normalize_on(counts_a, kept)
    tm_b = normalize_on(counts_b, kept)
    density = ts.sojourn_density(grid, straj)
    m = restrict_density(density, kept)
    pairs_a = leading_eigenpairs(tm_a, k, tol=1e-8)
    pairs_b = leading_eigenpairs(tm_b, k, tol=1e-8)
    rset = pair_and_ratio(pairs_a, pairs_b, tau, dtau, m)
    return PipelineResult(
        params=params, sim=sim, grid=grid, trajectory=traj, standardized=straj,
        density=density, kept=kept, m=m, tm_a=tm_a, tm_b=tm_b,
        pairs_a=pairs_a, pairs_b=pairs_b, resonances=filter_and_sort(rset, kappa_max),
    )


@pytest.fixture(scope="session")
def subcritical_run():
    """Stable-point regime at the acceptance scale."""
    return run_pipeline(
        ts.HopfParams(-0.2, 1.0, 0.0, 0.1),
        ts.SimConfig(dt=1e-2, n_samples=1_000_000, sample_stride=10, seed=12345),
    )


@pytest.fixture(scope="session")
def supercritical_run():
    """Limit-cycle regime at the acceptance scale."""
    return run_pipeline(
        ts.HopfParams(0.2, 1.0, 1.0, 0.05),
        ts.SimConfig(dt=1e-2, n_samples=1_000_000, sample_stride=10, seed=2024),
    )


def two_state_chain():
    """The analytic 2-state chain: column-stochastic T, stationary m."""
    T = np.array([[0.9, 0.2], [0.1, 0.8]])
    m = np.array([2.0, 1.0]) / 3.0
    return T, m


def greedy_complex_match(estimates, references):
    """Greedy nearest matching; returns list of (est_idx, ref_idx)."""
    est_left = list(range(len(estimates)))
    ref_left = list(range(len(references)))
    out = []
    while est_left and ref_left:
        best = min(
            ((abs(estimates[i] - references[j]), i, j) for i in est_left for j in ref_left),
        )
        _, i, j = best
        out.append((i, j))
        est_left.remove(i)
        ref_left.remove(j)
    return out
