"""Nonconvex proximal p-norm machinery.

The sparsity penalty used by the solver is a family of functions g_{mu,p}
defined implicitly through a Legendre-Fenchel construction on a piecewise
helper h_{mu,p}.  The penalty itself is only needed for objective
monitoring; the solver touches it exclusively through its proximal map,
the p-shrinkage (generalized soft-thresholding) operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PNormParams",
    "h_value",
    "g_value",
    "p_shrink",
    "p_shrink_matrix",
]


@dataclass(frozen=True)
class PNormParams:
    """Exponent p in [0, 1] and scale mu > 0 of the penalty family."""

    p: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and 0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mu must be positive and finite, got {self.mu}")

    @property
    def knee(self) -> float:
        """Branch point mu^(1/(2-p)) where the quadratic core ends."""
        return self.mu ** (1.0 / (2.0 - self.p))


def h_value(t: float, params: PNormParams) -> float:
    """Piecewise helper h_{mu,p}: quadratic core, |t|^p/p (or log) tail.

    Continuous at the branch point |t| = mu^(1/(2-p)); the tail offset
    delta = (1/p - 1/2) * mu^(p/(2-p)) makes the two branches meet.
    """
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t}")
    p, mu = params.p, params.mu
    at = abs(t)
    if at <= params.knee:
        return at * at / (2.0 * mu)
    if p == 0.0:
        return math.log(at) - 0.5 * math.log(mu) + 0.5
    delta = (1.0 / p - 0.5) * mu ** (p / (2.0 - p))
    return at**p / p - delta


def p_shrink(x: float, threshold: float, p: float) -> float:
    """Scalar p-shrinkage: sign(x) * max(0, |x| - threshold^(2-p) * |x|^(p-1)).

    Reduces to soft thresholding at p = 1.  The output is zero exactly
    when |x| <= threshold (for every p in [0, 1]), which also guards the
    |x|^(p-1) singularity at the origin.
    """
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    if not (math.isfinite(threshold) and threshold >= 0.0):
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if threshold == 0.0:
        return x
    ax = abs(x)
    if ax <= threshold:
        return 0.0
    return math.copysign(ax - threshold ** (2.0 - p) * ax ** (p - 1.0), x)


def p_shrink_matrix(X: np.ndarray, threshold: float, p: float) -> np.ndarray:
    """Element-wise p-shrinkage of an array; same shape as the input."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("input array must be finite")
    if not (math.isfinite(threshold) and threshold >= 0.0):
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return _p_shrink_array(X, threshold, p)


def _p_shrink_array(X: np.ndarray, threshold, p: float) -> np.ndarray:
    """Unchecked vectorized kernel; `threshold` may broadcast against X."""
    thr = np.asarray(threshold, dtype=float)
    ax = np.abs(X)
    out = np.zeros_like(X)
    if np.all(thr == 0.0):
        return X.copy()
    keep = ax > thr
    thr_b = np.broadcast_to(thr, X.shape)[keep] if thr.ndim else thr
    axk = ax[keep]
    out[keep] = np.sign(X[keep]) * (axk - thr_b ** (2.0 - p) * axk ** (p - 1.0))
    return out


def _g_scalar(s: float, params: PNormParams) -> float:
    """g_{mu,p}(s) by 1-D maximization of phi(t) = s*t - t^2/2 + mu*h(t).

    phi is concave (t^2/2 - mu*h is convex with continuous derivative),
    so a coarse bracket plus ternary refinement is reliable.
    """
    p, mu = params.p, params.mu
    s = abs(s)  # g is even in s; the maximizer flips sign with s
    if s == 0.0:
        return 0.0  # sup_t(-t^2/2 + mu*h(t)) is attained at 0 exactly
    hi = max(2.0 * s, (2.0 * mu) ** (1.0 / (2.0 - p)), params.knee) + 1.0

    def phi(t: float) -> float:
        return s * t - 0.5 * t * t + mu * h_value(t, params)

    grid = np.linspace(0.0, hi, 513)
    vals = np.array([phi(t) for t in grid])
    k = int(np.argmax(vals))
    if k == len(grid) - 1:
        raise ArithmeticError(
            f"bracket [0, {hi}] failed to contain the maximizer (s={s})"
        )
    lo, up = grid[max(k - 1, 0)], grid[k + 1]
    for _ in range(200):
        m1 = lo + (up - lo) / 3.0
        m2 = up - (up - lo) / 3.0
        if phi(m1) < phi(m2):
            lo = m1
        else:
            up = m2
        if up - lo < 1e-13 * max(1.0, hi):
            break
    best = max(vals[k], phi(0.5 * (lo + up)))
    return max((best - 0.5 * s * s) / mu, 0.0)


def g_value(X: np.ndarray, params: PNormParams) -> float:
    """Sum of g_{mu,p} over the entries of X (objective diagnostics only).

    Evaluated numerically from the implicit definition; never called
    inside the solver loop, whose updates only need the prox map.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("input array must be finite")
    return float(sum(_g_scalar(s, params) for s in X.ravel()))
