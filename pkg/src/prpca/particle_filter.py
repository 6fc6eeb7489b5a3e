"""Bayesian state inference: Gaussian propagation, reweighting,
systematic resampling and MAP extraction over 6-component affine states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AffineState",
    "TransitionCovariance",
    "ParticleSet",
    "DegenerateWeightsError",
    "SCALE_FLOOR",
    "propagate",
    "reweight",
    "resample",
    "map_estimate",
]

# state vector layout used throughout: (pos_h, pos_w, scale, aspect, angle, skew)
POS_H, POS_W, SCALE, ASPECT, ANGLE, SKEW = range(6)

SCALE_FLOOR = 1e-3  # positive floor applied to scale and aspect after noise


class DegenerateWeightsError(ValueError):
    """All posterior weights vanished; the filter must be re-seeded."""


@dataclass(frozen=True)
class AffineState:
    """Particle state: position (pixels), scale, aspect, rotation, skew."""

    pos_h: float
    pos_w: float
    scale: float = 1.0
    aspect: float = 1.0
    angle: float = 0.0
    skew: float = 0.0

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.aspect > 0.0:
            raise ValueError(f"aspect must be positive, got {self.aspect}")

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.pos_h, self.pos_w, self.scale, self.aspect, self.angle, self.skew]
        )

    @staticmethod
    def from_array(a) -> "AffineState":
        a = np.asarray(a, dtype=float)
        return AffineState(*(float(a[k]) for k in range(6)))


@dataclass(frozen=True)
class TransitionCovariance:
    """Diagonal per-component variances of the Gaussian transition kernel."""

    var_h: float = 16.0
    var_w: float = 16.0
    var_scale: float = 1e-4
    var_aspect: float = 1e-4
    var_angle: float = 1e-4
    var_skew: float = 1e-6

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")

    def stds(self) -> np.ndarray:
        return np.sqrt(
            [self.var_h, self.var_w, self.var_scale,
             self.var_aspect, self.var_angle, self.var_skew]
        )


@dataclass
class ParticleSet:
    """N particle states (rows of a (N, 6) array) with normalized weights."""

    states: np.ndarray
    weights: np.ndarray
    rng_seed: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != 6 or len(self.states) < 1:
            raise ValueError(f"states must be (N, 6) with N >= 1, got {self.states.shape}")
        if self.weights.shape != (len(self.states),):
            raise ValueError("one weight per particle required")
        if np.any(self.weights < 0.0):
            raise ValueError("weights must be nonnegative")

    def __len__(self) -> int:
        return len(self.states)


def propagate(state: AffineState, cov: TransitionCovariance,
              rng: np.random.Generator) -> AffineState:
    """Add zero-mean Gaussian noise per component; clamp scale and aspect."""
    out = state.to_array() + rng.standard_normal(6) * cov.stds()
    out[SCALE] = max(out[SCALE], SCALE_FLOOR)
    out[ASPECT] = max(out[ASPECT], SCALE_FLOOR)
    return AffineState.from_array(out)


def reweight(weights, likelihoods) -> np.ndarray:
    """Posterior weights: element-wise product, normalized to sum 1."""
    weights = np.asarray(weights, dtype=float)
    likelihoods = np.asarray(likelihoods, dtype=float)
    if weights.shape != likelihoods.shape:
        raise ValueError("weights and likelihoods must have equal length")
    if np.any(likelihoods < 0.0):
        raise ValueError("likelihoods must be nonnegative")
    post = weights * likelihoods
    total = post.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("all posterior weights are zero")
    return post / total


def resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling: one uniform offset, stride 1/N, uniform output."""
    n = len(particles)
    w = particles.weights
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("cannot resample zero-mass weights")
    positions = (rng.uniform() + np.arange(n)) / n
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0  # guard the last bin against roundoff
    idx = np.searchsorted(cdf, positions, side="right")
    idx = np.minimum(idx, n - 1)
    return ParticleSet(
        states=particles.states[idx].copy(),
        weights=np.full(n, 1.0 / n),
        rng_seed=particles.rng_seed,
    )


def map_estimate(particles: ParticleSet, likelihoods=None) -> AffineState:
    """State of the maximum-posterior particle; ties go to the lowest index.

    With `likelihoods` given, the posterior is weights * likelihoods;
    otherwise the stored weights are taken as already posterior.
    """
    post = particles.weights
    if likelihoods is not None:
        post = reweight(post, likelihoods)
    return AffineState.from_array(particles.states[int(np.argmax(post))])
