"""Appearance model: affine patch extraction, observation assembly,
reconstruction error and the Gaussian observation likelihood.

Patches are sampled on a fixed-resolution grid mapped through a particle's
affine state, rescaled to [0, 1] gray levels and normalized to unit length,
so a candidate and the stored templates can be compared by inner products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .particle_filter import AffineState

__all__ = [
    "TemplateMatrix",
    "InvalidParticleError",
    "extract_patch",
    "warp_grid",
    "build_observation",
    "reconstruction_error",
    "likelihood",
    "log_likelihood",
    "to_gray",
]

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def to_gray(frame: np.ndarray) -> np.ndarray:
    """Float gray frame in [0, 1]; RGB(A) collapses with fixed 601 luma weights."""
    frame = np.asarray(frame)
    if frame.ndim == 2:
        if np.issubdtype(frame.dtype, np.integer):
            return frame.astype(float) / 255.0
        return frame.astype(float)
    if frame.ndim == 3 and frame.shape[2] in (3, 4):
        rgb = frame[..., :3].astype(float)
        if np.issubdtype(frame.dtype, np.integer):
            rgb /= 255.0
        return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    raise ValueError(f"expected gray or RGB frame, got shape {frame.shape}")


class InvalidParticleError(ValueError):
    """The particle's patch footprint lies entirely outside the frame."""


@dataclass
class TemplateMatrix:
    """Dictionary of i unit-norm template columns with importance weights."""

    columns: np.ndarray  # (j, i), each column unit norm
    patch_w: int
    patch_h: int
    weights: np.ndarray  # (i,), nonnegative, sums to 1

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        j, i = self.columns.shape
        if i < 2:
            raise ValueError(f"need at least 2 templates, got {i}")
        if j <= i:
            raise ValueError(f"patch length {j} must exceed template count {i}")
        if j != self.patch_w * self.patch_h:
            raise ValueError("column length must equal patch_w * patch_h")
        norms = np.linalg.norm(self.columns, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-8):
            raise ValueError("template columns must be unit norm")
        if np.any(self.weights < 0.0) or self.weights.shape != (i,):
            raise ValueError("weights must be nonnegative, one per template")
        if not math.isclose(self.weights.sum(), 1.0, abs_tol=1e-8):
            raise ValueError("weights must sum to 1")

    @property
    def count(self) -> int:
        return self.columns.shape[1]

    @property
    def length(self) -> int:
        return self.columns.shape[0]


def warp_grid(state: AffineState, patch_w: int, patch_h: int):
    """Image-plane sample coordinates (xs, ys) of the patch grid.

    Grid cells are centered on the state position; scale stretches both
    axes, aspect stretches rows relative to columns, skew shears columns
    by row offset, and the whole grid is rotated by the state angle.
    Arrays have shape (patch_h, patch_w) in pixel-center coordinates.
    """
    da = np.arange(patch_w) - (patch_w - 1) / 2.0
    db = np.arange(patch_h) - (patch_h - 1) / 2.0
    dxs = state.scale * (da[None, :] + state.skew * db[:, None])
    dys = state.scale * state.aspect * np.broadcast_to(db[:, None], (patch_h, patch_w))
    c, s = math.cos(state.angle), math.sin(state.angle)
    xs = state.pos_w + c * dxs - s * dys
    ys = state.pos_h + s * dxs + c * dys
    return xs, ys


def _bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Zero-padded bilinear sampling at continuous (x, y) coordinates."""
    h, w = image.shape
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    dx = xs - x0
    dy = ys - y0
    out = np.zeros_like(xs, dtype=float)
    for oy, ox, wgt in (
        (0, 0, (1 - dx) * (1 - dy)),
        (0, 1, dx * (1 - dy)),
        (1, 0, (1 - dx) * dy),
        (1, 1, dx * dy),
    ):
        xi = x0 + ox
        yi = y0 + oy
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = image[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        out += wgt * np.where(ok, vals, 0.0)
    return out


def extract_patch(image: np.ndarray, state: AffineState,
                  patch_w: int, patch_h: int) -> np.ndarray:
    """Sample, gray-scale to [0, 1] and unit-normalize one candidate patch.

    Out-of-frame samples are zero-filled.  A footprint that misses the
    frame entirely raises InvalidParticleError; a patch whose content is
    all zero comes back as the zero vector (the caller decides how to
    weight such a degenerate particle).
    """
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise ValueError(f"expected a nonempty 2-D gray image, got {image.shape}")
    if patch_w < 1 or patch_h < 1:
        raise ValueError("patch dimensions must be positive")
    if np.issubdtype(image.dtype, np.integer):
        image = image.astype(float) / 255.0
    else:
        image = image.astype(float)

    xs, ys = warp_grid(state, patch_w, patch_h)
    h, w = image.shape
    # bilinear support extends one pixel beyond the pixel-center rectangle
    inside = (xs > -1.0) & (xs < w) & (ys > -1.0) & (ys < h)
    if not inside.any():
        raise InvalidParticleError(
            f"patch footprint centered at ({state.pos_h:.1f}, {state.pos_w:.1f}) "
            "lies outside the frame"
        )
    patch = _bilinear(image, xs, ys)
    vec = patch.ravel(order="F")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return vec
    return vec / norm


def build_observation(templates: TemplateMatrix, candidate: np.ndarray) -> np.ndarray:
    """Stack template columns and the candidate into a j x (i+1) matrix."""
    candidate = np.asarray(candidate, dtype=float)
    if candidate.shape != (templates.length,):
        raise ValueError(
            f"candidate length {candidate.shape} does not match patch length "
            f"{templates.length}"
        )
    return np.column_stack([templates.columns, candidate])


def reconstruction_error(M: np.ndarray, decomposition) -> np.ndarray:
    """Residual M - L - S of a decomposition, same shape as M."""
    M = np.asarray(M, dtype=float)
    if M.shape != decomposition.low_rank.shape:
        raise ValueError("observation and decomposition shapes differ")
    return M - decomposition.low_rank - decomposition.sparse


def log_likelihood(eps_candidate: np.ndarray, sigma_eps: float) -> float:
    """log of the Gaussian observation likelihood of a residual column."""
    if not sigma_eps > 0.0:
        raise ValueError(f"sigma_eps must be positive, got {sigma_eps}")
    eps = np.asarray(eps_candidate, dtype=float)
    return math.log(INV_SQRT_2PI) - float(eps @ eps) / (2.0 * sigma_eps**2)


def likelihood(eps_candidate: np.ndarray, sigma_eps: float) -> float:
    """Observation likelihood (1/sqrt(2*pi)) * prod exp(-eps^2 / 2 sigma^2).

    Computed in log space; may underflow to 0.0 for hopeless candidates,
    which reweighting treats as zero posterior mass.
    """
    return math.exp(log_likelihood(eps_candidate, sigma_eps))
