"""Analytic small-noise ground truth for the planar oscillator.

Before the bifurcation (delta < 0) the generator spectrum is the
triangular lattice generated by the Jacobian eigenvalues of the stable
point,

    lambda_{ln} = (l + n) delta + i (n - l) gamma,   l, n = 0, 1, 2, ...

with eigenfunctions that are harmonics in the angle times generalized
Laguerre polynomials in the radius.  After the bifurcation (delta > 0)
the lattice associated with the stable cycle consists of parabolas,

    lambda_{0n} = -Phi n^2 + i n omega,      omega = gamma - beta delta,
    lambda_{ln} = -2 l delta + i n omega,    l >= 1,

where Phi = epsilon^2 (1 + beta^2) / (2 delta) is the phase-diffusion
coefficient, and the l = 0 eigenfunctions are harmonics in the isochron
phase theta - beta log(r / sqrt(delta)) times Hermite polynomials in the
radial offset from the cycle.

The same Phi is computed independently from the Floquet machinery of the
deterministic cycle: with M(t) the fundamental matrix over one period T,
e the tangent eigenvector of the monodromy M(T) normalized to the flow
velocity at the base point, f the corresponding left eigenvector with
<e, f> = 1, and unit diffusion D = I,

    C(T) = integral_0^T M(T) M(-s) D M(-s)^T M(T)^T ds,
    Phi  = epsilon^2 omega^2 / (2 T) * <C(T) f, f>,

with the overall sign fixed so that Phi >= 0.  Normalizing e to the
actual flow velocity (not to unit length) is what makes the omega^2
prefactor come out consistent with the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NumericalError, RegimeError, ValidationError
from .hopf import HopfParams, drift, jacobian

__all__ = [
    "LatticePoint",
    "ResonanceLattice",
    "FloquetData",
    "fp_lattice",
    "fp_eigenfunction",
    "po_lattice",
    "po_eigenfunction",
    "phase_diffusion_analytic",
    "fundamental_matrix",
    "floquet_analysis",
    "phase_diffusion_numeric",
    "po_lattice_general",
]


@dataclass(frozen=True)
class LatticePoint:
    l: int | tuple[int, ...]
    n: int
    value: complex
    multiplicity: int = 1


@dataclass(frozen=True)
class ResonanceLattice:
    entries: list[LatticePoint]
    regime: str  # "subcritical" | "supercritical"

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])


@dataclass(frozen=True)
class FloquetData:
    period: float
    omega: float
    monodromy: np.ndarray = field(repr=False)
    floquet_exponents: tuple[float, float] = (0.0, 0.0)
    e_vec: np.ndarray = field(repr=False, default=None)
    f_vec: np.ndarray = field(repr=False, default=None)
    c_matrix: np.ndarray = field(repr=False, default=None)
    phi: float = 0.0


def _with_multiplicities(raw: list[tuple], regime: str) -> ResonanceLattice:
    values = np.array([v for (_, _, v) in raw])
    entries = []
    for l, n, v in raw:
        same = np.abs(values - v) <= 1e-12 * max(1.0, abs(v))
        entries.append(LatticePoint(l=l, n=n, value=v, multiplicity=int(same.sum())))
    return ResonanceLattice(entries=entries, regime=regime)


def fp_lattice(alphas, max_order: int) -> ResonanceLattice:
    """Lattice of a stable point: all sums ``sum_i k_i alpha_i`` with |k| <= max_order.

    For a complex-conjugate pair the entries are labeled (l, n) with n
    counting the eigenvalue of positive imaginary part, so that
    lambda_{ln} = (l + n) Re(alpha) + i (n - l) Im(alpha).
    """
    alphas = [complex(a) for a in alphas]
    if max_order < 0:
        raise ValidationError("max_order must be >= 0")
    if any(a.real >= 0 for a in alphas):
        raise RegimeError("fp_lattice requires a stable point: all Re(alpha) < 0")
    raw = []
    if len(alphas) == 2 and abs(alphas[0] - alphas[1].conjugate()) <= 1e-12 * abs(alphas[0]):
        plus = alphas[0] if alphas[0].imag >= 0 else alphas[1]
        for total in range(max_order + 1):
            for n in range(total + 1):
                l = total - n
                raw.append((l, n, l * plus.conjugate() + n * plus))
    else:
        def rec(i, budget, k):
            if i == len(alphas):
                raw.append((tuple(k), 0, sum(ki * ai for ki, ai in zip(k, alphas))))
                return
            for ki in range(budget + 1):
                rec(i + 1, budget - ki, k + [ki])

        rec(0, max_order, [])
    return _with_multiplicities(raw, "subcritical")


def _eval_laguerre(k: int, alpha: int, x):
    """Generalized Laguerre L_k^alpha(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if k == 0:
        return prev
    cur = 1.0 + alpha - x
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1 + alpha - x) * cur - (j + alpha) * prev) / (j + 1)
    return cur


def _eval_hermite(k: int, x):
    """Physicists' Hermite H_k(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if k == 0:
        return prev
    cur = 2.0 * x
    for j in range(1, k):
        prev, cur = cur, 2.0 * x * cur - 2.0 * j * prev
    return cur


def fp_eigenfunction(l: int, n: int, params: HopfParams, point) -> complex | np.ndarray:
    """Subcritical eigenfunction at polar ``point = (r, theta)``.

    For n >= l this is exp(i(n-l)theta) sqrt(l!/n!) (kappa r)^(n-l)
    L_l^{n-l}(kappa^2 r^2) with kappa = sqrt(-delta)/epsilon; for n < l
    the complex conjugate of the (n, l) entry.
    """
    if params.delta >= 0:
        raise RegimeError("fp_eigenfunction requires delta < 0")
    if params.epsilon <= 0:
        raise ValidationError("fp_eigenfunction requires epsilon > 0")
    if l < 0 or n < 0:
        raise ValidationError("indices must be nonnegative")
    r, theta = np.asarray(point[0], dtype=np.float64), np.asarray(point[1], dtype=np.float64)
    if np.any(r < 0):
        raise ValidationError("radius must be >= 0")
    if n < l:
        return np.conjugate(fp_eigenfunction(n, l, params, point))
    kappa2 = -params.delta / params.epsilon**2
    alpha = n - l
    amp = math.sqrt(math.factorial(l) / math.factorial(n))
    radial = amp * (np.sqrt(kappa2) * r) ** alpha * _eval_laguerre(l, alpha, kappa2 * r**2)
    out = np.exp(1j * alpha * theta) * radial
    return complex(out) if out.ndim == 0 else out


def po_lattice(params: HopfParams, max_n: int, max_l: int) -> ResonanceLattice:
    """Supercritical lattice: parabola l = 0 plus flat families l >= 1."""
    if params.delta <= 0:
        raise RegimeError("po_lattice requires delta > 0")
    phi = phase_diffusion_analytic(params)
    omega = params.gamma - params.beta * params.delta
    raw = []
    for l in range(max_l + 1):
        for n in range(-max_n, max_n + 1):
            re = -phi * n * n if l == 0 else -2.0 * l * params.delta
            raw.append((l, n, complex(re, n * omega)))
    return _with_multiplicities(raw, "supercritical")


def po_eigenfunction(l: int, n: int, params: HopfParams, point) -> complex | np.ndarray:
    """Supercritical eigenfunction at polar ``point = (r, theta)``.

    (2^l l!)^(-1/2) exp(in(theta - beta log(r/sqrt(delta)))) H_l(sqrt(2 delta)/epsilon (r - sqrt(delta))).
    The phase isolines are the isochrons: radial lines for beta = 0,
    logarithmic spirals otherwise.
    """
    if params.delta <= 0:
        raise RegimeError("po_eigenfunction requires delta > 0")
    if params.epsilon <= 0:
        raise ValidationError("po_eigenfunction requires epsilon > 0")
    if l < 0:
        raise ValidationError("l must be nonnegative")
    r, theta = np.asarray(point[0], dtype=np.float64), np.asarray(point[1], dtype=np.float64)
    if np.any(r <= 0):
        raise ValidationError("radius must be > 0")
    sq = math.sqrt(params.delta)
    phase = n * (theta - params.beta * np.log(r / sq))
    arg = math.sqrt(2.0 * params.delta) / params.epsilon * (r - sq)
    out = _eval_hermite(l, arg) * np.exp(1j * phase) / math.sqrt(2.0**l * math.factorial(l))
    return complex(out) if out.ndim == 0 else out


def phase_diffusion_analytic(params: HopfParams) -> float:
    """Closed form Phi = epsilon^2 (1 + beta^2) / (2 delta) for delta > 0."""
    if params.delta <= 0:
        raise RegimeError("phase diffusion is defined for delta > 0")
    return params.epsilon**2 * (1.0 + params.beta**2) / (2.0 * params.delta)


def _cycle_frequency(params: HopfParams) -> float:
    omega = params.gamma - params.beta * params.delta
    if abs(omega) < 1e-12:
        raise NumericalError("cycle angular frequency is zero; period undefined")
    return omega


def fundamental_matrix(params: HopfParams, n_steps: int):
    """Fundamental matrix M(t) of the variational flow along the cycle.

    Integrates dM/dt = A(t) M, M(0) = I with classical fixed-step RK4 at
    n_steps uniform steps over one period; returns (times, mats) with
    mats[k] = M(times[k]) and mats[-1] the monodromy matrix.  The noise
    level plays no role here.
    """
    if params.delta <= 0:
        raise RegimeError("fundamental_matrix requires delta > 0")
    if n_steps < 16:
        raise ValidationError(f"n_steps must be >= 16, got {n_steps}")
    omega = _cycle_frequency(params)
    period = 2.0 * math.pi / abs(omega)
    sq = math.sqrt(params.delta)

    def a_of(t):
        ang = omega * t
        return jacobian(params, (sq * math.cos(ang), sq * math.sin(ang)))

    h = period / n_steps
    times = np.arange(n_steps + 1) * h
    mats = np.empty((n_steps + 1, 2, 2))
    m = np.eye(2)
    mats[0] = m
    for k in range(n_steps):
        t = times[k]
        a1 = a_of(t)
        a2 = a_of(t + 0.5 * h)
        a4 = a_of(t + h)
        k1 = a1 @ m
        k2 = a2 @ (m + 0.5 * h * k1)
        k3 = a2 @ (m + 0.5 * h * k2)
        k4 = a4 @ (m + h * k3)
        m = m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        mats[k + 1] = m
    return times, mats


def _inv2(m: np.ndarray) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def floquet_analysis(params: HopfParams, n_quad: int = 2048) -> FloquetData:
    """Monodromy spectrum and the quadrature route to the phase diffusion."""
    if params.delta <= 0:
        raise RegimeError("floquet_analysis requires delta > 0")
    if n_quad < 64:
        raise ValidationError(f"n_quad must be >= 64, got {n_quad}")
    omega = _cycle_frequency(params)
    times, mats = fundamental_matrix(params, n_quad)
    period = times[-1]
    mt = mats[-1]
    mu, vecs = np.linalg.eig(mt)
    mu = mu.real if np.max(np.abs(mu.imag)) < 1e-8 else mu
    unit = int(np.argmin(np.abs(mu - 1.0)))
    if abs(mu[unit] - 1.0) > 1e-4:
        raise ConvergenceError(
            f"unit Floquet multiplier off by {abs(mu[unit] - 1.0):.2e}; refine n_quad"
        )
    exponents = tuple(sorted((float(np.log(abs(m_)) / period) for m_ in mu), reverse=True))

    x0 = (math.sqrt(params.delta), 0.0)
    flow = drift(params, x0)
    e = np.real(vecs[:, unit])
    e = e * (np.linalg.norm(flow) / np.linalg.norm(e))
    if np.dot(e, flow) < 0:
        e = -e
    mu_l, vecs_l = np.linalg.eig(mt.T)
    unit_l = int(np.argmin(np.abs(mu_l - 1.0)))
    f = np.real(vecs_l[:, unit_l])
    ef = float(np.dot(e, f))
    if abs(ef) < 1e-12:
        raise ConvergenceError("tangent left/right Floquet vectors are orthogonal")
    f = f / ef

    # C(T) by trapezoidal quadrature with unit diffusion; epsilon^2 sits outside
    integrand = np.empty((n_quad + 1, 2, 2))
    for k in range(n_quad + 1):
        kmat = mt @ _inv2(mats[k])
        integrand[k] = kmat @ kmat.T
    h = period / n_quad
    c_t = h * (0.5 * integrand[0] + integrand[1:-1].sum(axis=0) + 0.5 * integrand[-1])
    c_t = 0.5 * (c_t + c_t.T)

    phi = abs(params.epsilon**2 * omega**2 / (2.0 * period) * float(f @ c_t @ f))
    return FloquetData(
        period=float(period),
        omega=float(omega),
        monodromy=mt,
        floquet_exponents=exponents,
        e_vec=e,
        f_vec=f,
        c_matrix=c_t,
        phi=phi,
    )


def phase_diffusion_numeric(params: HopfParams, n_quad: int) -> float:
    """Phase diffusion from the Floquet integral; converges to the closed form."""
    return floquet_analysis(params, n_quad).phi


def po_lattice_general(nu, omega: float, phi: float, max_n: int, max_l: int) -> ResonanceLattice:
    """Supercritical lattice from given cycle data.

    ``nu`` holds the contraction rates of the cycle (positive decay rates;
    2*delta for the normal form).  Families: lambda = -Phi n^2 + i n omega
    for l = 0 and lambda = -sum_i l_i nu_i + i n omega otherwise.
    """
    nu = [float(v) for v in nu]
    if any(v <= 0 for v in nu):
        raise RegimeError("po_lattice_general requires positive contraction rates")
    if phi < 0:
        raise ValidationError("phi must be >= 0")
    raw = []
    for n in range(-max_n, max_n + 1):
        raw.append((tuple(0 for _ in nu), n, complex(-phi * n * n, n * omega)))

    def rec(i, budget, k):
        if i == len(nu):
            if any(k):
                re = -sum(ki * vi for ki, vi in zip(k, nu))
                for n in range(-max_n, max_n + 1):
                    raw.append((tuple(k), n, complex(re, n * omega)))
            return
        for ki in range(budget + 1):
            rec(i + 1, budget - ki, k + [ki])

    rec(0, max_l, [])
    return _with_multiplicities(raw, "supercritical")
