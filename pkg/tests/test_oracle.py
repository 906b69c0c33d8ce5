"""Analytic lattices, eigenfunctions, and the Floquet phase-diffusion route."""

import math

import numpy as np
import pytest

import transferspec as ts
from transferspec.errors import ConvergenceError, RegimeError, ValidationError
from transferspec.oracle import _eval_hermite, _eval_laguerre, floquet_analysis

from conftest import greedy_complex_match


# --------------------------------------------------------------------------- lattices


def test_fp_lattice_examples():
    lat = ts.fp_lattice([-0.5 + 2j, -0.5 - 2j], 1)
    by_ln = {(e.l, e.n): e.value for e in lat.entries}
    assert by_ln[(0, 0)] == 0.0
    assert by_ln[(0, 1)] == -0.5 + 2j
    assert by_ln[(1, 0)] == -0.5 - 2j


def test_fp_lattice_order_two_brute_force():
    alphas = [-0.5 + 2j, -0.5 - 2j]
    lat = ts.fp_lattice(alphas, 2)
    # independent enumeration
    expected = sorted(
        (l * alphas[1] + n * alphas[0] for l in range(3) for n in range(3) if l + n <= 2),
        key=lambda z: (z.real, z.imag),
    )
    got = sorted(lat.values(), key=lambda z: (z.real, z.imag))
    assert len(got) == 6
    assert max(abs(a - b) for a, b in zip(got, expected)) < 1e-14
    # all six values are distinct here, so every multiplicity is 1
    assert all(e.multiplicity == 1 for e in lat.entries)


def test_fp_lattice_reports_collision_multiplicity():
    # gamma = 0 collapses (0,1) and (1,0) onto the same real value
    lat = ts.fp_lattice([-0.5 + 0j, -0.5 - 0j], 1)
    mult = {(e.l, e.n): e.multiplicity for e in lat.entries}
    assert mult[(0, 1)] == 2 and mult[(1, 0)] == 2
    assert mult[(0, 0)] == 1


def test_fp_lattice_general_alphas():
    alphas = [-1.0 + 0j, -2.0 + 0j, -3.5 + 0j]
    lat = ts.fp_lattice(alphas, 2)
    vals = sorted(v.real for v in lat.values())
    expected = sorted(
        sum(k[i] * alphas[i].real for i in range(3))
        for k in [(a, b, c) for a in range(3) for b in range(3) for c in range(3) if a + b + c <= 2]
    )
    assert np.allclose(vals, expected)


def test_fp_lattice_unstable_error():
    with pytest.raises(RegimeError):
        ts.fp_lattice([0.1 + 1j, 0.1 - 1j], 2)


def test_fp_lattice_conjugate_closed_and_left_half_plane():
    lat = ts.fp_lattice([-0.3 + 1.7j, -0.3 - 1.7j], 3)
    vals = lat.values()
    for v in vals:
        assert np.min(np.abs(vals - v.conjugate())) < 1e-14
        assert v.real <= 1e-14
    zeros = [e for e in lat.entries if abs(e.value) < 1e-14]
    assert len(zeros) == 1 and zeros[0].l == 0 and zeros[0].n == 0


def test_po_lattice_examples():
    p = ts.HopfParams(0.1, 1.0, 0.0, 0.05)
    lat = ts.po_lattice(p, max_n=2, max_l=1)
    by_ln = {(e.l, e.n): e.value for e in lat.entries}
    assert by_ln[(0, 1)] == pytest.approx(-0.0125 + 1.0j, abs=1e-15)
    assert by_ln[(0, 0)] == 0.0
    assert by_ln[(1, 1)] == pytest.approx(-0.2 + 1.0j, abs=1e-15)
    p2 = ts.HopfParams(0.1, 1.0, 1.0, 0.05)
    lat2 = ts.po_lattice(p2, max_n=1, max_l=0)
    by_ln2 = {(e.l, e.n): e.value for e in lat2.entries}
    assert by_ln2[(0, 1)].imag == pytest.approx(0.9, abs=1e-15)
    assert by_ln2[(0, 1)].real == pytest.approx(-2 * 0.0125, abs=1e-15)  # (1+beta^2) doubles Phi
    with pytest.raises(RegimeError):
        ts.po_lattice(ts.HopfParams(-0.1, 1.0, 0.0, 0.05), 1, 1)


def test_po_lattice_general_examples():
    lat = ts.po_lattice_general([0.2], omega=0.9, phi=0.025, max_n=2, max_l=1)
    by_ln = {(e.l, e.n): e.value for e in lat.entries}
    assert by_ln[((0,), 2)] == pytest.approx(-0.1 + 1.8j, abs=1e-15)
    assert by_ln[((0,), 0)] == 0.0
    assert by_ln[((1,), 1)] == pytest.approx(-0.2 + 0.9j, abs=1e-15)
    with pytest.raises(RegimeError):
        ts.po_lattice_general([-0.2], 0.9, 0.025, 1, 1)


# --------------------------------------------------------------------------- polynomials


def laguerre_by_expansion(k, alpha, x):
    total = np.zeros_like(np.asarray(x, dtype=float))
    for j in range(k + 1):
        total += (-1) ** j * math.comb(k + alpha, k - j) * x**j / math.factorial(j)
    return total


def hermite_by_expansion(k, x):
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for j in range(k // 2 + 1):
        total += (
            (-1) ** j / (math.factorial(j) * math.factorial(k - 2 * j)) * (2 * x) ** (k - 2 * j)
        )
    return math.factorial(k) * total


def test_polynomial_recurrences_match_expansions():
    rng = np.random.default_rng(6)
    x = rng.uniform(0.0, 8.0, size=100)
    for k in range(11):
        for alpha in (0, 1, 2, 3):
            ref = laguerre_by_expansion(k, alpha, x)
            got = _eval_laguerre(k, alpha, x)
            assert np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1.0)) < 1e-10
        ref = hermite_by_expansion(k, x - 4.0)
        got = _eval_hermite(k, x - 4.0)
        assert np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1.0)) < 1e-10


# --------------------------------------------------------------------------- eigenfunctions


SUB = ts.HopfParams(-0.5, 2.0, 0.0, 0.3)


def test_fp_eigenfunction_examples():
    assert ts.fp_eigenfunction(0, 0, SUB, (1.3, 0.7)) == pytest.approx(1.0)
    r, th = 0.8, 1.1
    kappa = math.sqrt(-SUB.delta) / SUB.epsilon
    expected = kappa * r * np.exp(1j * th)
    assert ts.fp_eigenfunction(0, 1, SUB, (r, th)) == pytest.approx(expected, abs=1e-14)
    # L_1^0(1) = 0 on the circle r^2 = -eps^2/delta
    r_zero = math.sqrt(-SUB.epsilon**2 / SUB.delta)
    assert abs(ts.fp_eigenfunction(1, 1, SUB, (r_zero, 0.3))) < 1e-14


def test_fp_eigenfunction_mirror_is_conjugate():
    val_01 = ts.fp_eigenfunction(0, 1, SUB, (0.9, 0.4))
    val_10 = ts.fp_eigenfunction(1, 0, SUB, (0.9, 0.4))
    assert val_10 == pytest.approx(np.conjugate(val_01), abs=1e-14)


def test_fp_eigenfunction_regime_error():
    with pytest.raises(RegimeError):
        ts.fp_eigenfunction(0, 1, ts.HopfParams(0.5, 1.0, 0.0, 0.1), (1.0, 0.0))


def test_fp_eigenfunction_orthonormal_under_gaussian_density():
    # tensor quadrature: Gauss-Legendre radially, trapezoid in the angle
    p = SUB
    kappa2 = -p.delta / p.epsilon**2
    nodes, wts = np.polynomial.legendre.leggauss(220)
    rmax = 8.0 / math.sqrt(kappa2)
    r = 0.5 * rmax * (nodes + 1.0)
    wr = 0.5 * rmax * wts
    nth = 64
    th = np.arange(nth) * (2 * np.pi / nth)
    wth = 2 * np.pi / nth
    dens = (kappa2 / np.pi) * np.exp(-kappa2 * r**2)  # normalized stationary density
    orders = [(l, n) for l in range(4) for n in range(4)]
    for li, ni in orders:
        for lj, nj in orders:
            fi = ts.fp_eigenfunction(li, ni, p, (r[:, None], th[None, :]))
            fj = ts.fp_eigenfunction(lj, nj, p, (r[:, None], th[None, :]))
            val = np.sum((np.conjugate(fi) * fj * wth).sum(axis=1) * dens * r * wr)
            expected = 1.0 if (li, ni) == (lj, nj) else 0.0
            assert abs(val - expected) < 1e-6


def test_po_eigenfunction_examples():
    p = ts.HopfParams(0.25, 1.0, 0.0, 0.1)
    assert ts.po_eigenfunction(0, 0, p, (0.7, 2.0)) == pytest.approx(1.0)
    assert ts.po_eigenfunction(0, 1, p, (0.9, 1.2)) == pytest.approx(np.exp(1.2j), abs=1e-14)
    # twist: phase isolines follow theta - beta log(r / sqrt(delta))
    pt = ts.HopfParams(0.25, 1.0, 0.8, 0.1)
    r, th = 0.9, 1.2
    got = ts.po_eigenfunction(0, 1, pt, (r, th))
    assert np.angle(got) == pytest.approx(th - 0.8 * math.log(r / 0.5), abs=1e-14)
    with pytest.raises(RegimeError):
        ts.po_eigenfunction(0, 1, ts.HopfParams(-0.25, 1.0, 0.0, 0.1), (1.0, 0.0))


# --------------------------------------------------------------------------- phase diffusion


def test_phase_diffusion_analytic():
    assert ts.phase_diffusion_analytic(ts.HopfParams(0.1, 1.0, 0.0, 0.05)) == pytest.approx(0.0125)
    assert ts.phase_diffusion_analytic(ts.HopfParams(0.1, 1.0, 0.0, 0.0)) == 0.0
    a = ts.phase_diffusion_analytic(ts.HopfParams(0.3, 1.0, 1.0, 0.07))
    b = ts.phase_diffusion_analytic(ts.HopfParams(0.3, 1.0, 0.0, 0.07))
    assert a / b == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(RegimeError):
        ts.phase_diffusion_analytic(ts.HopfParams(-0.1, 1.0, 0.0, 0.05))


def test_fundamental_matrix_monodromy_exponents():
    p = ts.HopfParams(0.2, 1.0, 0.5, 0.3)
    times, mats = ts.fundamental_matrix(p, 2048)
    period = times[-1]
    mult = np.linalg.eigvals(mats[-1])
    exps = sorted(np.log(np.abs(mult)) / period, reverse=True)
    assert abs(exps[0]) < 1e-6
    assert abs(exps[1] + 2 * p.delta) < 1e-6
    # Liouville: det M(T) = exp(-2 delta T) since tr A = -2 delta on the cycle
    assert np.linalg.det(mats[-1]) == pytest.approx(math.exp(-2 * p.delta * period), rel=1e-6)


def test_fundamental_matrix_ignores_noise_level():
    a = ts.fundamental_matrix(ts.HopfParams(0.2, 1.0, 0.5, 0.0), 256)[1]
    b = ts.fundamental_matrix(ts.HopfParams(0.2, 1.0, 0.5, 0.7), 256)[1]
    assert np.array_equal(a, b)


def test_fundamental_matrix_validation():
    with pytest.raises(RegimeError):
        ts.fundamental_matrix(ts.HopfParams(-0.2, 1.0, 0.0, 0.1), 256)
    with pytest.raises(ValidationError):
        ts.fundamental_matrix(ts.HopfParams(0.2, 1.0, 0.0, 0.1), 8)


@pytest.mark.parametrize("delta", [0.1, 0.3])
@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_phase_diffusion_numeric_matches_analytic(delta, beta):
    p = ts.HopfParams(delta, 1.0, beta, 0.05)
    num = ts.phase_diffusion_numeric(p, 4096)
    ana = ts.phase_diffusion_analytic(p)
    assert abs(num - ana) / ana < 1e-4


def test_phase_diffusion_numeric_zero_noise():
    assert ts.phase_diffusion_numeric(ts.HopfParams(0.2, 1.0, 1.0, 0.0), 512) == 0.0


def test_phase_diffusion_numeric_convergence_rate():
    p = ts.HopfParams(0.1, 1.0, 1.0, 0.05)
    ana = ts.phase_diffusion_analytic(p)
    errs = [abs(ts.phase_diffusion_numeric(p, n) - ana) for n in (256, 512, 1024)]
    assert errs[0] / errs[1] >= 1.9
    assert errs[1] / errs[2] >= 1.9


def test_floquet_data_invariants():
    fd = floquet_analysis(ts.HopfParams(0.2, 1.0, 1.0, 0.05), 1024)
    assert min(abs(e) for e in fd.floquet_exponents) < 1e-6
    c = fd.c_matrix
    assert np.allclose(c, c.T)
    assert np.all(np.linalg.eigvalsh(c) >= -1e-12)
    assert fd.phi >= 0
    assert np.dot(fd.e_vec, fd.f_vec) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        floquet_analysis(ts.HopfParams(0.2, 1.0, 1.0, 0.05), 32)


def test_phase_diffusion_unit_multiplier_guard():
    # gamma = beta*delta makes the frequency vanish; no periodic orbit data
    with pytest.raises((ConvergenceError, Exception)):
        floquet_analysis(ts.HopfParams(0.2, 0.2, 1.0, 0.05), 256)


# --------------------------------------------------------------------------- cross checks


def test_supercritical_estimates_match_parabola(supercritical_run):
    """The estimated leading parabola sits near the analytic lattice."""
    r = supercritical_run
    lat = ts.po_lattice(r.params, max_n=2, max_l=0)
    est = [z for z in r.resonances.values() if abs(z.imag) < 2.0]
    matches = greedy_complex_match(est, list(lat.values()))
    for i, j in matches:
        assert abs(est[i] - lat.values()[j]) < 0.05
