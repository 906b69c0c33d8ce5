"""Spectral weights, correlation and power-spectrum reconstruction, and
their sample-estimate counterparts.

Weight convention.  The stored right eigenvectors are density-like (they
satisfy ``T p = zeta p``); the corresponding eigenfunction over the
partition is the density relative to the stationary weight, ``psi_i =
p_i / m_i``.  With that substitution the weight of resonance j for
observables f, g is

    w_j = (f^T D(m) psi_j) (left_j^H D(m) g) / (left_j^H D(m) psi_j)
        = (f^T p_j) (left_j^H D(m) g) / (left_j^H p_j),

which makes the reconstruction of the correlation function exact on an
analytic chain when all modes are kept:

    C(t) = sum_j w_j exp(lambda_j t) - <f> <g>.

The power spectral density is the corresponding sum of Lorentzian
profiles,

    S(w) = -(1/pi) sum_j w_j Re(lambda_j) / ((w - Im lambda_j)^2 + Re(lambda_j)^2),

over resonances with negative real part; the zero mode degenerates to a
point mass at frequency zero and is excluded (its contribution sits in
the subtracted mean term).  All spectra in this package are two-sided
densities in angular frequency, so the integral of S over the real line
equals the covariance contribution sum_j w_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import NormalizationError, ValidationError
from .eigen import ResonanceSet

__all__ = [
    "ObservableVec",
    "SpectralWeights",
    "CorrelationReconstruction",
    "PsdReconstruction",
    "weights",
    "observable_mean",
    "reconstruct_correlation",
    "reconstruct_psd",
    "sample_correlation",
    "sample_psd",
]


@dataclass(frozen=True)
class ObservableVec:
    """Observable evaluated at kept-box centers."""

    values: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValidationError("observable values must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SpectralWeights:
    """Per-resonance complex weights, aligned with a ResonanceSet."""

    values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CorrelationReconstruction:
    t: np.ndarray
    values: np.ndarray
    imag_residual: float


@dataclass(frozen=True)
class PsdReconstruction:
    omega: np.ndarray
    values: np.ndarray
    imag_residual: float


def observable_mean(m: np.ndarray, f: ObservableVec) -> float:
    return float(np.dot(np.asarray(m), f.values))


def weights(
    f: ObservableVec, g: ObservableVec, m: np.ndarray, rset: ResonanceSet
) -> SpectralWeights:
    """Project the observable pair onto each right/left eigenvector pair."""
    m = np.asarray(m, dtype=np.float64)
    dim = m.size
    if f.values.size != dim or g.values.size != dim:
        raise ValidationError("observables and density must share the kept-box dimension")
    pos = m > 0
    out = np.empty(len(rset.resonances), dtype=complex)
    for idx, res in enumerate(rset.resonances):
        norm = np.sum(res.left.conjugate()[pos] * res.right[pos])
        if abs(norm) < 1e-14:
            raise NormalizationError(
                f"left/right normalization {abs(norm):.2e} too small for resonance {idx}"
            )
        proj_f = np.sum(f.values[pos] * res.right[pos])
        proj_g = np.sum(res.left.conjugate() * m * g.values)
        out[idx] = proj_f * proj_g / norm
    return SpectralWeights(values=out)


def reconstruct_correlation(
    rset: ResonanceSet, w: SpectralWeights, means: tuple[float, float], t_grid
) -> CorrelationReconstruction:
    """C(t) = sum_j w_j exp(lambda_j t) - mean_f * mean_g on t_grid >= 0."""
    t = np.asarray(t_grid, dtype=np.float64)
    if np.any(t < 0):
        raise ValidationError("t_grid must be nonnegative")
    lam = rset.values()
    total = np.zeros(t.size, dtype=complex)
    for value, weight in zip(lam, w.values):
        total += weight * np.exp(value * t)
    total -= means[0] * means[1]
    scale = max(np.max(np.abs(total.real)), 1e-300)
    return CorrelationReconstruction(
        t=t, values=total.real, imag_residual=float(np.max(np.abs(total.imag)) / scale)
    )


def reconstruct_psd(
    rset: ResonanceSet, w: SpectralWeights, omega_grid, zero_tol: float = 1e-8
) -> PsdReconstruction:
    """Sum of Lorentzians over resonances with Re(lambda) < -zero_tol.

    The zero mode (and any spurious eigenvalue with nonnegative real
    part) is excluded: its Lorentzian degenerates to a point mass the
    frequency grid cannot represent.
    """
    omega = np.asarray(omega_grid, dtype=np.float64)
    total = np.zeros(omega.size, dtype=complex)
    for res, weight in zip(rset.resonances, w.values):
        lam = res.value
        if lam.real >= -zero_tol:
            continue
        total += weight * (-lam.real / np.pi) / ((omega - lam.imag) ** 2 + lam.real**2)
    scale = max(np.max(np.abs(total.real), initial=0.0), 1e-300)
    return PsdReconstruction(
        omega=omega, values=total.real, imag_residual=float(np.max(np.abs(total.imag), initial=0.0) / scale)
    )


def sample_correlation(x, y, max_lag: int) -> np.ndarray:
    """Biased (1/N) cross-covariance of two equal-length series at lags 0..max_lag.

    Entry k estimates E[x(t+k) y(t)] - <x><y>; means are removed first.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if y.size != n:
        raise ValidationError("series must have equal length")
    if max_lag >= n:
        raise ValidationError(f"max_lag {max_lag} must be < series length {n}")
    xc = x - x.mean()
    yc = y - y.mean()
    out = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        out[k] = np.dot(xc[k:], yc[: n - k]) / n
    return out


def sample_psd(x, sampling_interval: float, segment_len: int | None = None, overlap: float = 0.5):
    """Welch PSD of a series, as a two-sided density in angular frequency.

    Hann window, mean removed per segment, 50% overlap by default,
    default segment length len(x)//8.  The density normalization makes
    2 * integral over the returned (nonnegative) frequencies equal the
    sample variance, up to windowing bias.  Returns (omega, psd).
    """
    x = np.asarray(x, dtype=np.float64)
    if segment_len is None:
        segment_len = max(len(x) // 8, 8)
    if segment_len > len(x):
        raise ValidationError(f"segment_len {segment_len} exceeds series length {len(x)}")
    if not 0 <= overlap < 1:
        raise ValidationError("overlap must lie in [0, 1)")
    freqs, psd = scipy.signal.welch(
        x,
        fs=1.0 / sampling_interval,
        window="hann",
        nperseg=segment_len,
        noverlap=int(overlap * segment_len),
        detrend="constant",
        return_onesided=True,
        scaling="density",
    )
    # one-sided cycles/time -> two-sided rad/time
    return 2.0 * np.pi * freqs, psd / (4.0 * np.pi)
