"""Low-rank + sparse decomposition by ADMM with p-shrinkage.

Splits an observation matrix M into a low-rank part L and a sparse part
S by alternating p-shrinkage on the entries of S, p-shrinkage on the
singular values of the L subproblem, and a scaled Lagrange-multiplier
update, while the scale factor mu decays geometrically.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .proximal import _p_shrink_array, g_value, PNormParams, p_shrink_matrix

__all__ = [
    "SolverConfig",
    "Decomposition",
    "SolverDivergenceError",
    "default_lambda",
    "s_step",
    "l_step",
    "multiplier_update",
    "decompose",
    "decompose_batch",
]


class SolverDivergenceError(RuntimeError):
    """Raised when the residual turns non-finite; carries the iteration."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite residual at iteration {iteration}")
        self.iteration = iteration


def default_lambda(j: int, i: int) -> float:
    """Default sparsity weight (1/10) * sqrt(max(j, i+1)) for a j x (i+1) solve."""
    if j < 1 or i < 1:
        raise ValueError(f"need j >= 1 and i >= 1, got j={j}, i={i}")
    return 0.1 * math.sqrt(max(j, i + 1))


@dataclass(frozen=True)
class SolverConfig:
    """Tunables of the decomposition solver.

    mu0=None scales the start to 0.99 * ||M||_2 at solve time, and
    lambda_reg=None falls back to default_lambda for the matrix shape.

    mu_floor stops the geometric decay: the multiplier step I += R/mu
    over-relaxes by a factor 1/mu, so letting mu fall much below ~0.62
    makes the iteration explode before tight tolerances are reachable.
    Freezing mu keeps the dual update contractive while the multiplier
    still drives the residual to zero.
    """

    p: float = 0.5
    rho: float = 0.9
    mu0: Optional[float] = None
    lambda_reg: Optional[float] = None
    tol: float = 1e-5
    max_iter: int = 500
    mu_floor: float = 1.0
    verbose: bool = False

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not (0.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.mu0 is not None and not self.mu0 > 0.0:
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if self.lambda_reg is not None and not self.lambda_reg > 0.0:
            raise ValueError(f"lambda_reg must be positive, got {self.lambda_reg}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.mu_floor > 0.0:
            raise ValueError(f"mu_floor must be positive, got {self.mu_floor}")


@dataclass
class Decomposition:
    """Solver output: M ~ low_rank + sparse, plus convergence diagnostics."""

    low_rank: np.ndarray
    sparse: np.ndarray
    multiplier: np.ndarray
    iterations: int
    final_residual: float
    converged: bool


def s_step(M, L, I, mu: float, lambda_reg: float, p: float) -> np.ndarray:
    """Sparse-part update: p-shrink M - L + I with threshold lambda_reg * mu."""
    M, L, I = (np.asarray(a, dtype=float) for a in (M, L, I))
    if not (M.shape == L.shape == I.shape):
        raise ValueError(f"shape mismatch: {M.shape}, {L.shape}, {I.shape}")
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    return p_shrink_matrix(M - L + I, lambda_reg * mu, p)


def l_step(M, S, I, mu: float, p: float) -> np.ndarray:
    """Low-rank update: p-shrink the singular values of M - S + I by mu."""
    M, S, I = (np.asarray(a, dtype=float) for a in (M, S, I))
    if not (M.shape == S.shape == I.shape):
        raise ValueError(f"shape mismatch: {M.shape}, {S.shape}, {I.shape}")
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    U, sv, Vt = np.linalg.svd(M - S + I, full_matrices=False)
    sv = _p_shrink_array(sv, mu, p)
    return (U * sv) @ Vt


def multiplier_update(I, M, L, S, mu: float) -> np.ndarray:
    """Scaled dual ascent: I + (M - L - S) / mu."""
    I, M, L, S = (np.asarray(a, dtype=float) for a in (I, M, L, S))
    if not (I.shape == M.shape == L.shape == S.shape):
        raise ValueError("shape mismatch between multiplier and residual terms")
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    return I + (M - L - S) / mu


def decompose(
    M: np.ndarray,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[tuple] = None,
) -> Decomposition:
    """Decompose a single matrix; see decompose_batch for the loop contract.

    `init` optionally warm-starts (L, S, I); by default all three start
    at zero.  Deterministic for identical inputs.
    """
    out = decompose_batch(np.asarray(M, dtype=float)[None], cfg, init=init)
    return out[0]


def decompose_batch(
    Ms: np.ndarray,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[tuple] = None,
) -> list[Decomposition]:
    """Decompose a stack of equally-shaped matrices in lockstep.

    Each slice follows the identical iteration it would get alone:
    S-step, L-step, residual check, multiplier update, then
    mu <- max(rho * mu, mu_floor), stopping when the relative residual
    ||M - L - S||_F / ||M||_F drops below tol or max_iter is hit.
    A slice that converges is frozen while the rest continue, so batched
    and one-at-a-time solves produce the same results.
    """
    Ms = np.asarray(Ms, dtype=float)
    if Ms.ndim != 3 or Ms.shape[1] == 0 or Ms.shape[2] == 0:
        raise ValueError(f"expected a nonempty (n, rows, cols) stack, got {Ms.shape}")
    if not np.all(np.isfinite(Ms)):
        raise ValueError("matrices must be finite")

    n = Ms.shape[0]
    lam = cfg.lambda_reg
    if lam is None:
        lam = default_lambda(Ms.shape[1], max(Ms.shape[2] - 1, 1))
    p, rho, tol = cfg.p, cfg.rho, cfg.tol

    if init is None:
        L = np.zeros_like(Ms)
        S = np.zeros_like(Ms)
        I = np.zeros_like(Ms)
    else:
        L, S, I = (np.broadcast_to(np.asarray(a, float), Ms.shape).copy() for a in init)

    norms = np.linalg.norm(Ms, axis=(1, 2))
    if cfg.mu0 is not None:
        mu = np.full(n, float(cfg.mu0))
    else:
        spectral = np.linalg.norm(Ms, 2, axis=(1, 2))
        mu = np.where(spectral > 0.0, 0.99 * spectral, 1.0)

    active = np.ones(n, dtype=bool)
    iterations = np.zeros(n, dtype=int)
    residuals = np.zeros(n)
    converged = np.zeros(n, dtype=bool)

    for it in range(1, cfg.max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ma, La, Ia = Ms[idx], L[idx], I[idx]
        mua = mu[idx][:, None, None]

        Sa = _p_shrink_array(Ma - La + Ia, lam * mua, p)
        U, sv, Vt = np.linalg.svd(Ma - Sa + Ia, full_matrices=False)
        sv = _p_shrink_array(sv, mu[idx][:, None], p)
        La = (U * sv[:, None, :]) @ Vt

        R = Ma - La - Sa
        r = np.linalg.norm(R, axis=(1, 2))
        r = np.where(norms[idx] > 0, r / np.where(norms[idx] > 0, norms[idx], 1.0), 0.0)
        if not np.all(np.isfinite(r)):
            raise SolverDivergenceError(it)

        Ia = Ia + R / mua
        L[idx], S[idx], I[idx] = La, Sa, Ia
        mu[idx] = np.maximum(rho * mu[idx], cfg.mu_floor)
        iterations[idx] = it
        residuals[idx] = r

        done = r < tol
        converged[idx[done]] = True
        active[idx[done]] = False

        if cfg.verbose:
            obj = _objective(Ms[idx[0]], La[0], Sa[0], Ia[0], float(mua[0, 0, 0]),
                             lam, p)
            print(f"iter\t{it}\tresidual\t{r[0]:.6e}\tobjective\t{obj:.6e}",
                  file=sys.stderr)

    return [
        Decomposition(
            low_rank=L[k],
            sparse=S[k],
            multiplier=I[k],
            iterations=int(iterations[k]),
            final_residual=float(residuals[k]),
            converged=bool(converged[k]),
        )
        for k in range(n)
    ]


def _objective(M, L, S, I, mu: float, lam: float, p: float) -> float:
    """Augmented-Lagrangian value for debug logging (uses g_value)."""
    sv = np.linalg.svd(L, compute_uv=False)
    quad = 0.5 / mu * float(np.linalg.norm(M - L - S + I)) ** 2
    return (
        g_value(sv, PNormParams(p, mu))
        + lam * g_value(S, PNormParams(p, mu * lam))
        + quad
    )
