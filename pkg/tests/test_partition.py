"""Box partition, standardization, and sojourn density."""

import numpy as np
import pytest

import transferspec as ts
from transferspec.errors import DegenerateVarianceError, EmptyDomainError, ValidationError
from transferspec.partition import locate_many

UNIT_2X2 = ts.GridSpec((0.0, 0.0), (1.0, 1.0), (2, 2))


def _traj(points, interval=1.0):
    return ts.Trajectory(interval, np.asarray(points, dtype=float))


def test_standardize_degenerate_series():
    with pytest.raises(DegenerateVarianceError):
        ts.standardize(_traj([(1.0, 1.0)] * 10))


def test_standardize_known_values():
    traj = _traj([(0, 0), (2, 0), (-2, 0), (0, 0)])
    with pytest.raises(DegenerateVarianceError):
        ts.standardize(traj)  # y column is constant
    traj = _traj([(0, 1), (2, -1), (-2, 1), (0, -1)])
    std, params = ts.standardize(traj)
    s = np.sqrt(2.0)  # population std of {0, 2, -2, 0}
    assert np.allclose(std.states[:, 0], [0, s, -s, 0], atol=1e-15)
    assert np.allclose(params.std, [s, 1.0])


def test_standardize_round_trip():
    rng = np.random.default_rng(8)
    traj = _traj(rng.normal(3.0, 2.5, size=(500, 2)))
    std, params = ts.standardize(traj)
    back = params.invert(std.states)
    assert np.max(np.abs(back - traj.states)) < 1e-12
    assert abs(std.states.mean()) < 1e-14
    assert np.allclose(std.states.std(axis=0), 1.0, atol=1e-12)


@pytest.mark.parametrize(
    "point,expected",
    [
        ((0.25, 0.25), 0),
        ((0.75, 0.25), 1),
        ((0.25, 0.75), 2),
        ((0.75, 0.75), 3),
        ((1.0, 0.5), None),
        ((0.5, 1.0), None),
        ((-0.01, 0.5), None),
        ((0.0, 0.0), 0),
        ((0.5, 0.5), 3),
    ],
)
def test_locate_flat_row_major(point, expected):
    assert ts.locate(UNIT_2X2, point) == expected


def test_locate_is_a_partition_on_probe_lattice():
    grid = ts.GridSpec((-1.0, -2.0), (2.0, 1.0), (7, 5))
    xs = np.linspace(-1.0, 2.0, 140, endpoint=False) + 1e-9
    ys = np.linspace(-2.0, 1.0, 100, endpoint=False) + 1e-9
    pts = np.array([(x, y) for x in xs for y in ys])
    idx = locate_many(grid, pts)
    assert np.all(idx >= 0)
    assert np.all(idx < grid.n_boxes)
    counts = np.bincount(idx, minlength=grid.n_boxes)
    assert counts.sum() == len(pts)
    assert np.all(counts == (140 // 7) * (100 // 5))


def test_sojourn_single_box():
    traj = _traj([(0.1, 0.1)] * 25)
    dens = ts.sojourn_density(UNIT_2X2, traj)
    assert dens.values[0] == 1.0
    assert np.all(dens.values[1:] == 0.0)
    assert dens.n_samples_in_domain == 25


def test_sojourn_alternating_two_boxes():
    traj = _traj([(0.25, 0.25), (0.75, 0.25)] * 50)
    dens = ts.sojourn_density(UNIT_2X2, traj)
    assert dens.values[0] == 0.5
    assert dens.values[1] == 0.5


def test_sojourn_uniform_multinomial():
    rng = np.random.default_rng(1)
    traj = _traj(rng.uniform(0.0, 1.0, size=(1_000_000, 2)))
    dens = ts.sojourn_density(UNIT_2X2, traj)
    assert np.max(np.abs(dens.values - 0.25)) < 0.005
    assert abs(dens.values.sum() - 1.0) <= 1e-12


def test_sojourn_excludes_out_of_domain():
    traj = _traj([(0.25, 0.25), (5.0, 5.0), (0.75, 0.75), (-3.0, 0.5)])
    dens = ts.sojourn_density(UNIT_2X2, traj)
    assert dens.n_samples_in_domain == 2
    assert dens.values[0] == 0.5 and dens.values[3] == 0.5


def test_sojourn_reorder_invariance():
    rng = np.random.default_rng(2)
    pts = rng.uniform(0, 1, size=(4000, 2))
    d1 = ts.sojourn_density(UNIT_2X2, _traj(pts))
    d2 = ts.sojourn_density(UNIT_2X2, _traj(pts[rng.permutation(4000)]))
    assert np.array_equal(d1.values, d2.values)


def test_sojourn_empty_domain_error():
    with pytest.raises(EmptyDomainError):
        ts.sojourn_density(UNIT_2X2, _traj([(5.0, 5.0)] * 3))


def test_grid_validation():
    with pytest.raises(ValidationError):
        ts.GridSpec((0.0, 0.0), (0.0, 1.0), (2, 2))
    with pytest.raises(ValidationError):
        ts.GridSpec((0.0, 0.0), (1.0, 1.0), (0, 2))


def test_box_centers_row_major():
    centers = UNIT_2X2.box_centers()
    assert np.allclose(centers, [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)])
