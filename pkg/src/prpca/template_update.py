"""Adaptive template dictionary maintenance.

Template importance decays with per-column reconstruction error.  When the
tracked candidate looks sufficiently different from every stored template
(by vector angle) and the frame is not judged occluded (by the magnitude
of the sparse column), the least important template is replaced and given
the median weight.  Weights are then renormalized and capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .appearance import TemplateMatrix

__all__ = [
    "UpdateThresholds",
    "decay_weights",
    "template_angle",
    "occlusion_level",
    "maybe_replace",
    "UpdateResult",
]


@dataclass(frozen=True)
class UpdateThresholds:
    """Angle gate (degrees), occlusion gate (fraction of j) and weight cap."""

    psi_star: float = 30.0
    xi_star: float = 0.1
    w_cap: float = 0.3

    def __post_init__(self):
        if not (0.0 < self.psi_star < 90.0):
            raise ValueError(f"psi_star must be in (0, 90) degrees, got {self.psi_star}")
        if not (0.0 <= self.xi_star <= 1.0):
            raise ValueError(f"xi_star must be in [0, 1], got {self.xi_star}")
        if not (0.0 < self.w_cap <= 1.0):
            raise ValueError(f"w_cap must be in (0, 1], got {self.w_cap}")


@dataclass(frozen=True)
class UpdateResult:
    """Outcome of one maybe_replace call."""

    templates: TemplateMatrix
    replaced: bool
    replaced_index: int | None
    min_angle_deg: float
    occlusion: float


def decay_weights(weights: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Multiply each w_k by exp(-||eps column k||); no normalization here."""
    weights = np.asarray(weights, dtype=float)
    eps = np.asarray(eps, dtype=float)
    i = len(weights)
    if eps.ndim != 2 or eps.shape[1] < i:
        raise ValueError(f"need at least {i} residual columns, got {eps.shape}")
    norms = np.linalg.norm(eps[:, :i], axis=0)
    return weights * np.exp(-norms)


def template_angle(candidate: np.ndarray, template: np.ndarray) -> float:
    """Angle in degrees between two unit vectors, clamped into [0, 180]."""
    candidate = np.asarray(candidate, dtype=float)
    template = np.asarray(template, dtype=float)
    if np.linalg.norm(candidate) == 0.0 or np.linalg.norm(template) == 0.0:
        raise ValueError("cannot measure the angle of a zero vector")
    cosine = float(np.clip(candidate @ template, -1.0, 1.0))
    return math.degrees(math.acos(cosine))


def occlusion_level(S: np.ndarray) -> float:
    """Sum of |entries| of the candidate (last) column of the sparse part."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] < 2:
        raise ValueError(f"expected a matrix with templates + candidate, got {S.shape}")
    return float(np.abs(S[:, -1]).sum())


def _cap_weights(w: np.ndarray, cap: float) -> np.ndarray:
    """Clamp the largest weights to `cap`, rescaling the rest to the leftover.

    Water-filling: capped entries stay frozen at the cap while the free
    ones share the remaining mass, so the result settles at max <= cap
    whenever cap * len(w) >= 1.  An infeasible cap (cap * len(w) < 1)
    gets a single best-effort pass.
    """
    w = w.copy()
    feasible = cap * len(w) >= 1.0
    frozen = np.zeros(len(w), dtype=bool)
    for _ in range(len(w)):
        over = (w > cap) & ~frozen
        if not over.any():
            break
        frozen |= over
        w[frozen] = cap
        free = ~frozen
        free_sum = w[free].sum()
        leftover = 1.0 - cap * frozen.sum()
        if free.any() and free_sum > 0.0 and leftover > 0.0:
            w[free] *= leftover / free_sum
        if not feasible:
            break
    return w


def maybe_replace(templates: TemplateMatrix, candidate: np.ndarray,
                  eps: np.ndarray, S: np.ndarray,
                  thresholds: UpdateThresholds) -> UpdateResult:
    """One template-update step for the current frame's tracking result.

    Always decays and renormalizes weights; replaces the least-weighted
    template with the candidate only when the candidate is novel (minimum
    angle above psi_star) and the occlusion measure stays below
    xi_star * j.  The returned TemplateMatrix is a new object.
    """
    candidate = np.asarray(candidate, dtype=float)
    if candidate.shape != (templates.length,):
        raise ValueError("candidate length does not match the template length")

    w = decay_weights(templates.weights, eps)
    angles = [
        template_angle(candidate, templates.columns[:, k])
        for k in range(templates.count)
    ]
    min_angle = min(angles)
    occ = occlusion_level(S)
    occ_gate = thresholds.xi_star * templates.length

    columns = templates.columns
    replaced = False
    replaced_index = None
    if min_angle > thresholds.psi_star and occ < occ_gate:
        replaced = True
        replaced_index = int(np.argmin(w))
        columns = columns.copy()
        columns[:, replaced_index] = candidate
        w[replaced_index] = float(np.median(w))

    w = w / w.sum()
    if w.max() > thresholds.w_cap:
        w = _cap_weights(w, thresholds.w_cap)

    return UpdateResult(
        templates=TemplateMatrix(
            columns=columns,
            patch_w=templates.patch_w,
            patch_h=templates.patch_h,
            weights=w,
        ),
        replaced=replaced,
        replaced_index=replaced_index,
        min_angle_deg=min_angle,
        occlusion=occ,
    )
