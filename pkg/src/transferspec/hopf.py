"""Planar oscillator normal form with additive white noise.

The system integrated here is, in Cartesian coordinates,

    dx = [delta*x - gamma*y - (x^2+y^2)*(x - beta*y)] dt + epsilon dW_x
    dy = [gamma*x + delta*y - (x^2+y^2)*(beta*x + y)] dt + epsilon dW_y

with independent unit Wiener increments on both coordinates.  In polar
coordinates the deterministic part reads dr = (delta*r - r^3) dt and
dtheta = (gamma - beta*r^2) dt; the familiar Ito correction
epsilon^2/(2r) of the radial SDE is induced automatically by the additive
Cartesian noise and must not be added again.  For delta < 0 the origin is
a stable point, for delta > 0 a stable limit cycle of radius sqrt(delta)
exists with angular frequency gamma - beta*delta.

Reproducibility contract
------------------------
The noise stream is fully pinned down: a PCG64 bit generator (seeded via
``numpy.random.SeedSequence``) supplies raw 64-bit words, and standard
normals are produced from them with the Box-Muller transform, two words
per pair of draws.  Equal seeds therefore give bit-identical trajectories
on any platform with IEEE-754 doubles, independent of numpy's Generator
method implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DivergenceError, ValidationError

__all__ = [
    "HopfParams",
    "SimConfig",
    "Trajectory",
    "GaussianStream",
    "drift",
    "jacobian",
    "simulate",
]


@dataclass(frozen=True)
class HopfParams:
    """Coefficients of the stochastic normal form.

    delta : linear stability (1/time), gamma : base angular frequency
    (rad/time), beta : twist/shear factor (dimensionless), epsilon :
    noise intensity (state/sqrt(time)).
    """

    delta: float
    gamma: float
    beta: float
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("delta", "gamma", "beta", "epsilon"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v!r}")
        if self.epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class SimConfig:
    """Integration controls for :func:`simulate`.

    ``spinup_steps=None`` resolves to 10% of the post-spinup integration
    steps.  ``seed`` fully determines the noise realization.
    """

    dt: float = 1e-2
    n_samples: int = 1000
    sample_stride: int = 1
    spinup_steps: int | None = None
    seed: int = 0
    initial_state: tuple[float, float] = (0.0, 0.0)
    blowup_radius: float = 1e6

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive and finite, got {self.dt}")
        if self.n_samples <= 0:
            raise ValidationError(f"n_samples must be > 0, got {self.n_samples}")
        if self.sample_stride < 1:
            raise ValidationError(f"sample_stride must be >= 1, got {self.sample_stride}")
        if self.spinup_steps is not None and self.spinup_steps < 0:
            raise ValidationError(f"spinup_steps must be >= 0, got {self.spinup_steps}")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        if not all(math.isfinite(c) for c in self.initial_state):
            raise ValidationError("initial_state must be finite")
        if self.blowup_radius <= 0:
            raise ValidationError("blowup_radius must be positive")

    @property
    def sampling_interval(self) -> float:
        return self.dt * self.sample_stride

    def resolved_spinup(self) -> int:
        if self.spinup_steps is not None:
            return self.spinup_steps
        return (self.n_samples * self.sample_stride) // 10


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped planar sample path, one row of ``states`` per sample."""

    sampling_interval: float
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = np.ascontiguousarray(self.states, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != 2:
            raise ValidationError(f"states must have shape (N, 2), got {states.shape}")
        if states.shape[0] == 0:
            raise ValidationError("trajectory must contain at least one sample")
        if not np.all(np.isfinite(states)):
            raise ValidationError("trajectory states must be finite")
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.sampling_interval


class GaussianStream:
    """Reproducible stream of standard normal pairs.

    Box-Muller on the raw 64-bit PCG64 output; each pair consumes exactly
    two words, so the stream position depends only on how many pairs were
    drawn, not on chunking.
    """

    def __init__(self, seed: int):
        self._bitgen = np.random.PCG64(np.random.SeedSequence(seed))

    def draw_pairs(self, n_pairs: int) -> np.ndarray:
        """Return ``(n_pairs, 2)`` independent standard normals."""
        raw = self._bitgen.random_raw(2 * n_pairs).reshape(n_pairs, 2)
        # u1 in (0, 1] avoids log(0); u2 in [0, 1)
        u1 = ((raw[:, 0] >> np.uint64(11)) + np.uint64(1)) * 2.0**-53
        u2 = (raw[:, 1] >> np.uint64(11)) * 2.0**-53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        out = np.empty((n_pairs, 2), dtype=np.float64)
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out


def drift(params: HopfParams, state) -> np.ndarray:
    """Deterministic vector field at ``state``."""
    x, y = float(state[0]), float(state[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValidationError("state must be finite")
    r2 = x * x + y * y
    fx = params.delta * x - params.gamma * y - r2 * (x - params.beta * y)
    fy = params.gamma * x + params.delta * y - r2 * (params.beta * x + y)
    return np.array([fx, fy])


def jacobian(params: HopfParams, state) -> np.ndarray:
    """Analytic Jacobian of :func:`drift`; equals [[delta,-gamma],[gamma,delta]] at the origin."""
    x, y = float(state[0]), float(state[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValidationError("state must be finite")
    d, g, b = params.delta, params.gamma, params.beta
    return np.array(
        [
            [d - 3 * x * x - y * y + 2 * b * x * y, -g - 2 * x * y + b * (x * x + 3 * y * y)],
            [g - b * (3 * x * x + y * y) - 2 * x * y, d - x * x - 3 * y * y - 2 * b * x * y],
        ]
    )


@numba.njit(cache=True)
def _em_chunk(x, y, delta, gamma, beta, noise_scale, dt, noise, gstep0, spinup, stride, out, stored, blowup_sq):
    n_out = out.shape[0]
    for i in range(noise.shape[0]):
        r2 = x * x + y * y
        fx = delta * x - gamma * y - r2 * (x - beta * y)
        fy = gamma * x + delta * y - r2 * (beta * x + y)
        x = x + fx * dt + noise_scale * noise[i, 0]
        y = y + fy * dt + noise_scale * noise[i, 1]
        if x * x + y * y > blowup_sq:
            return x, y, stored, gstep0 + i + 1
        g = gstep0 + i + 1
        if g >= spinup and (g - spinup) % stride == 0 and stored < n_out:
            out[stored, 0] = x
            out[stored, 1] = y
            stored += 1
    return x, y, stored, -1


_CHUNK_STEPS = 1 << 20


def simulate(params: HopfParams, config: SimConfig) -> Trajectory:
    """Integrate the SDE with the Euler-Maruyama scheme.

    The spinup segment is discarded, then one state is stored every
    ``sample_stride`` steps (the first stored state is the state reached
    at the end of the spinup).  Raises :class:`DivergenceError` when the
    state leaves the blow-up radius, which signals unstable parameters or
    an oversized time step long before floating-point overflow.
    """
    spinup = config.resolved_spinup()
    stride = config.sample_stride
    total_steps = spinup + (config.n_samples - 1) * stride
    out = np.empty((config.n_samples, 2), dtype=np.float64)
    x, y = float(config.initial_state[0]), float(config.initial_state[1])
    stored = 0
    if spinup == 0:
        out[0, 0] = x
        out[0, 1] = y
        stored = 1
    stream = GaussianStream(config.seed)
    noise_scale = params.epsilon * math.sqrt(config.dt)
    blowup_sq = config.blowup_radius**2
    gstep = 0
    while gstep < total_steps:
        n = min(_CHUNK_STEPS, total_steps - gstep)
        noise = stream.draw_pairs(n)
        x, y, stored, blown_at = _em_chunk(
            x, y, params.delta, params.gamma, params.beta, noise_scale, config.dt,
            noise, gstep, spinup, stride, out, stored, blowup_sq,
        )
        if blown_at >= 0:
            raise DivergenceError(
                f"|state| exceeded blow-up radius {config.blowup_radius:g} "
                f"at step {blown_at} (t = {blown_at * config.dt:g})"
            )
        gstep += n
    if stored != config.n_samples:
        raise AssertionError("internal sample bookkeeping error")
    return Trajectory(config.sampling_interval, out)
