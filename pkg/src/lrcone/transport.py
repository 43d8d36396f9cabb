"""Wavepacket front tracking and finite-time transport exponents.

All quantities live on a finite chain, so every sample carries a
reflection-safety flag: a sample is trusted only while the threshold front
plus a guard band stays short of the far wall.  Fits consume safe samples
exclusively and refuse to run on too little data rather than extrapolate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientDataError, ReflectionWarning
from .onebody import EigenSystem, amplitude_row

PROBES = ("outside_probability", "tail_sum")

DEFAULT_FRONT_EPSILON = 1e-12
#: Guard band (sites) between a front and the far wall for a sample to count.
DEFAULT_SAFETY_MARGIN = 32
#: Grid points of the uniform midpoint rule behind every time average.
TIME_AVERAGE_POINTS = 64


@dataclass(frozen=True)
class FrontSample:
    time: float
    front: int
    reflection_safe: bool


@dataclass(frozen=True)
class TransportProfile:
    """Threshold-front positions over a time grid, with safety flags."""

    times: np.ndarray
    fronts: np.ndarray
    reflection_safe: np.ndarray
    epsilon: float
    probe: str
    margin: int
    size: int


@dataclass(frozen=True)
class ExponentEstimate:
    """Slope of log front vs log time over the safe samples."""

    alpha: float
    stderr: float
    window: Tuple[float, float]
    r_squared: float
    sample_count: int


@dataclass(frozen=True)
class RPlusProfile:
    """Finite-time values of -log P(t^beta, t) / log t along the grid."""

    beta: float
    times: np.ndarray
    values: np.ndarray
    reflection_safe: np.ndarray


@dataclass(frozen=True)
class AlphaUEstimate:
    """Largest probed beta whose profile stays under the divergence cutoff.

    ``status`` is "ok" when the estimate is interior to the beta grid,
    "all_divergent" when no beta qualifies, and "window_limited" when even
    the largest probed beta qualifies, so the window cannot resolve the
    supremum from above.
    """

    value: Optional[float]
    status: str
    beta_step: float
    window: Tuple[float, float]


def _packet_mass(eig: EigenSystem, t: float, probe: str) -> np.ndarray:
    """Per-site mass of the packet launched from site 1.

    Mass means |K|^2 for the plain probe and plain |K| (doubled-generator
    dynamics) for the tail probe.
    """
    if probe not in PROBES:
        raise ValueError(f"unknown probe {probe!r}")
    if probe == "outside_probability":
        row = amplitude_row(eig, 1, t, scale=1)
        return np.abs(row.amplitudes) ** 2
    row = amplitude_row(eig, 1, t, scale=2)
    return np.abs(row.amplitudes)


def _beyond(mass: np.ndarray) -> np.ndarray:
    """B[x] = total mass strictly beyond site x, for x = 0..N."""
    beyond = np.zeros(len(mass) + 1)
    beyond[:-1] = np.cumsum(mass[::-1])[::-1]
    return beyond


def _beyond_mass(eig: EigenSystem, t: float, probe: str) -> np.ndarray:
    return _beyond(_packet_mass(eig, t, probe))


def front_position(
    eig: EigenSystem,
    t: float,
    epsilon: float = DEFAULT_FRONT_EPSILON,
    probe: str = "outside_probability",
    margin: int = DEFAULT_SAFETY_MARGIN,
) -> FrontSample:
    """Largest x whose beyond-x mass still exceeds epsilon; 0 if none.

    The sample is flagged unsafe when the front plus the guard band reaches
    the far wall, i.e. when reflected weight could already contaminate it.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    beyond = _beyond_mass(eig, t, probe)
    hits = np.nonzero(beyond[1:] > epsilon)[0]
    front = int(hits[-1] + 1) if len(hits) else 0
    return FrontSample(float(t), front, bool(front + margin < eig.size))


def transport_profile(
    eig: EigenSystem,
    times: Sequence[float],
    epsilon: float = DEFAULT_FRONT_EPSILON,
    probe: str = "outside_probability",
    margin: int = DEFAULT_SAFETY_MARGIN,
) -> TransportProfile:
    samples = [front_position(eig, t, epsilon, probe, margin) for t in times]
    return TransportProfile(
        times=np.asarray([s.time for s in samples]),
        fronts=np.asarray([s.front for s in samples], dtype=np.int64),
        reflection_safe=np.asarray([s.reflection_safe for s in samples], dtype=bool),
        epsilon=float(epsilon),
        probe=probe,
        margin=int(margin),
        size=eig.size,
    )


def _slope_fit(logx: np.ndarray, logy: np.ndarray):
    design = np.vstack([logx, np.ones_like(logx)]).T
    coef, *_ = np.linalg.lstsq(design, logy, rcond=None)
    fitted = design @ coef
    rss = float(((logy - fitted) ** 2).sum())
    tss = float(((logy - logy.mean()) ** 2).sum())
    dof = len(logx) - 2
    var = rss / dof if dof > 0 else 0.0
    spread = float(((logx - logx.mean()) ** 2).sum())
    stderr = float(np.sqrt(var / spread)) if spread > 0 else float("inf")
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0
    return float(coef[0]), float(coef[1]), stderr, r_squared, rss


def fit_alpha(
    profile: TransportProfile,
    min_samples: int = 5,
    min_decades: float = 1.5,
) -> ExponentEstimate:
    """Power-law exponent of the front: least squares on (log t, log front).

    Only reflection-safe samples with a nonzero front enter.  Requires at
    least ``min_samples`` of them spanning ``min_decades`` decades in time.
    """
    usable = profile.reflection_safe & (profile.fronts >= 1) & (profile.times > 0)
    times = profile.times[usable]
    fronts = profile.fronts[usable].astype(np.float64)
    if len(times) < min_samples:
        raise InsufficientDataError(
            f"only {len(times)} usable samples, need {min_samples}"
        )
    span = np.log10(times.max() / times.min())
    if span < min_decades - 1e-12:
        raise InsufficientDataError(
            f"time window spans {span:.2f} decades, need {min_decades}"
        )
    alpha, _, stderr, r_squared, _ = _slope_fit(np.log(times), np.log(fronts))
    return ExponentEstimate(
        alpha=alpha,
        stderr=stderr,
        window=(float(times.min()), float(times.max())),
        r_squared=r_squared,
        sample_count=int(len(times)),
    )


def r_plus_profile(
    eig: EigenSystem,
    beta: float,
    times: Sequence[float],
    margin: int = DEFAULT_SAFETY_MARGIN,
) -> RPlusProfile:
    """Pointwise -log P(floor(t^beta), t) / log t with per-sample safety flags.

    A sample is safe when both the probed distance and the actual threshold
    front keep the guard band from the wall.  Values are computed from the
    probability clamped away from exact zero, so far-out probes return
    large finite numbers rather than infinities.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    times = np.asarray(list(times), dtype=np.float64)
    if np.any(times <= 1.0):
        raise ValueError("time grid must stay above 1 (log t in the denominator)")
    values = np.empty(len(times))
    safe = np.empty(len(times), dtype=bool)
    n = eig.size
    for i, t in enumerate(times):
        distance = int(np.floor(t**beta))
        beyond = _beyond_mass(eig, t, "outside_probability")
        hits = np.nonzero(beyond[1:] > DEFAULT_FRONT_EPSILON)[0]
        front = int(hits[-1] + 1) if len(hits) else 0
        safe[i] = (distance + margin < n) and (front + margin < n)
        prob = beyond[distance] if distance <= n else 0.0
        values[i] = -np.log(max(prob, 1e-300)) / np.log(t)
    return RPlusProfile(float(beta), times, values, safe)


def alpha_u_estimate(
    eig: EigenSystem,
    betas: Sequence[float],
    times: Sequence[float],
    r_max: float,
    margin: int = DEFAULT_SAFETY_MARGIN,
) -> AlphaUEstimate:
    """Sup over the beta grid of profiles that stay below the cutoff.

    The finite window cannot distinguish "finite" from "small so far";
    ``r_max`` draws that line explicitly and the grid resolution is
    reported alongside the estimate.
    """
    betas = sorted(float(b) for b in betas)
    if len(betas) < 2:
        raise ValueError("need at least two beta values")
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    qualifying = []
    for beta in betas:
        profile = r_plus_profile(eig, beta, times, margin)
        if not profile.reflection_safe.any():
            continue
        if profile.values[profile.reflection_safe].max() < r_max:
            qualifying.append(beta)
    step = float(np.diff(betas).max())
    window = (float(min(times)), float(max(times)))
    if not qualifying:
        return AlphaUEstimate(None, "all_divergent", step, window)
    best = max(qualifying)
    status = "window_limited" if best == betas[-1] else "ok"
    return AlphaUEstimate(best, status, step, window)


def position_moment(
    eig: EigenSystem,
    p: float,
    t: float,
    margin: int = DEFAULT_SAFETY_MARGIN,
) -> float:
    """p-th moment of the site index over the packet launched from site 1.

    Emits ``ReflectionWarning`` (and still returns the value) once the
    threshold front encroaches on the guard band.
    """
    if p < 0:
        raise ValueError("moment order must be >= 0")
    mass = _packet_mass(eig, t, "outside_probability")
    beyond = _beyond(mass)
    sites = np.arange(1, eig.size + 1, dtype=np.float64)
    hits = np.nonzero(beyond[1:] > DEFAULT_FRONT_EPSILON)[0]
    front = int(hits[-1] + 1) if len(hits) else 0
    if front + margin >= eig.size:
        warnings.warn(
            f"front {front} within {margin} sites of the wall at t={t}",
            ReflectionWarning,
            stacklevel=2,
        )
    return float((sites**p) @ mass)


def time_averaged_moment(
    eig: EigenSystem,
    p: float,
    horizon: float,
    points: int = TIME_AVERAGE_POINTS,
    margin: int = DEFAULT_SAFETY_MARGIN,
) -> float:
    """Cesaro mean of the p-th moment over [0, horizon], midpoint rule."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    grid = (np.arange(points) + 0.5) * (horizon / points)
    return float(np.mean([position_moment(eig, p, t, margin) for t in grid]))
