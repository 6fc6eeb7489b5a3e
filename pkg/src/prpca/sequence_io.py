"""Dataset ingestion, config files and results persistence.

Frames are pre-extracted image files (PNG/JPEG/BMP) named so that
lexicographic order is frame order.  Ground truth uses one `x,y,w,h`
rectangle per line.  Configs are flat `key = value` text with dotted
keys for nested groups; results are plain CSV whose floats round-trip
exactly through repr.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .admm import SolverConfig
from .appearance import to_gray
from .metrics import BoundingBox
from .particle_filter import TransitionCovariance
from .template_update import UpdateThresholds
from .tracker import TrackerConfig

__all__ = [
    "SequenceManifest",
    "load_sequence",
    "load_frame",
    "iter_frames",
    "parse_gt",
    "parse_config",
    "format_config",
    "write_results_csv",
    "read_results_csv",
    "RESULTS_HEADER",
]

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

RESULTS_HEADER = "frame,x,y,w,h,likelihood,occlusion_level,template_replaced"


@dataclass(frozen=True)
class SequenceManifest:
    """Ordered frame paths, uniform frame size, optional ground truth."""

    name: str
    paths: tuple
    width: int
    height: int
    ground_truth: tuple | None = None


def load_sequence(seq_dir, gt_path=None) -> SequenceManifest:
    """Scan a frame directory, validate sizes, optionally attach ground truth."""
    seq_dir = Path(seq_dir)
    if not seq_dir.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {seq_dir}")
    paths = sorted(
        p for p in seq_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not paths:
        raise ValueError(f"no decodable images (png/jpg/bmp) in {seq_dir}")

    size = None
    for p in paths:
        try:
            with Image.open(p) as im:
                this = im.size
        except Exception as err:
            raise ValueError(f"unreadable image {p}: {err}") from err
        if size is None:
            size = this
        elif this != size:
            raise ValueError(
                f"frame size mismatch: {paths[0].name} is {size[0]}x{size[1]} "
                f"but {p.name} is {this[0]}x{this[1]}"
            )

    gt = None
    if gt_path is not None:
        gt = tuple(parse_gt(Path(gt_path).read_text()))
        if len(gt) != len(paths):
            raise ValueError(
                f"ground truth has {len(gt)} boxes for {len(paths)} frames"
            )
    return SequenceManifest(
        name=seq_dir.name,
        paths=tuple(paths),
        width=size[0],
        height=size[1],
        ground_truth=gt,
    )


def load_frame(path) -> np.ndarray:
    """Decode one image file to a float gray frame in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    return to_gray(arr)


def iter_frames(manifest: SequenceManifest):
    for p in manifest.paths:
        yield load_frame(p)


def parse_gt(text: str) -> list[BoundingBox]:
    """Parse `x,y,w,h` lines (comma or whitespace separated) into boxes."""
    boxes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 4:
            raise ValueError(f"ground truth line {lineno}: expected 4 values, got {raw!r}")
        try:
            x, y, w, h = (float(v) for v in parts)
        except ValueError as err:
            raise ValueError(f"ground truth line {lineno}: {err}") from err
        if w <= 0 or h <= 0:
            raise ValueError(f"ground truth line {lineno}: non-positive box size in {raw!r}")
        boxes.append(BoundingBox(x, y, w, h))
    return boxes


# config keys <-> dataclass fields; "auto" encodes the data-dependent None
_SOLVER_KEYS = ("p", "rho", "mu0", "lambda_reg", "tol", "max_iter", "mu_floor")
_TRANSITION_KEYS = ("var_h", "var_w", "var_scale", "var_aspect", "var_angle", "var_skew")
_THRESHOLD_KEYS = ("psi_star", "xi_star", "w_cap")
_TOP_KEYS = ("template_count", "particle_count", "patch_w", "patch_h",
             "sigma_eps", "rng_seed", "warm_start")
_INT_KEYS = {"template_count", "particle_count", "patch_w", "patch_h",
             "rng_seed", "solver.max_iter"}
_BOOL_KEYS = {"warm_start"}
_OPTIONAL_KEYS = {"solver.mu0", "solver.lambda_reg"}


def format_config(cfg: TrackerConfig) -> str:
    """Flat key = value snapshot, keys sorted, floats repr round-trippable."""
    items = {}
    for key in _TOP_KEYS:
        items[key] = getattr(cfg, key)
    for key in _SOLVER_KEYS:
        items[f"solver.{key}"] = getattr(cfg.solver, key)
    for key in _TRANSITION_KEYS:
        items[f"transition.{key}"] = getattr(cfg.transition, key)
    for key in _THRESHOLD_KEYS:
        items[f"thresholds.{key}"] = getattr(cfg.thresholds, key)
    lines = []
    for key in sorted(items):
        value = items[key]
        if value is None:
            text = "auto"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> TrackerConfig:
    """Parse a flat config; unknown keys are errors."""
    known = set(_TOP_KEYS)
    known |= {f"solver.{k}" for k in _SOLVER_KEYS}
    known |= {f"transition.{k}" for k in _TRANSITION_KEYS}
    known |= {f"thresholds.{k}" for k in _THRESHOLD_KEYS}

    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value

    def convert(key, value):
        if key in _OPTIONAL_KEYS and value.lower() == "auto":
            return None
        if key in _BOOL_KEYS:
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"config key {key}: expected a boolean, got {value!r}")
        if key in _INT_KEYS:
            return int(value)
        return float(value)

    def group(prefix, keys, cls):
        vals = {}
        for k in keys:
            full = f"{prefix}.{k}"
            if full in raw:
                vals[k] = convert(full, raw.pop(full))
        return cls(**vals)

    solver = group("solver", _SOLVER_KEYS, SolverConfig)
    transition = group("transition", _TRANSITION_KEYS, TransitionCovariance)
    thresholds = group("thresholds", _THRESHOLD_KEYS, UpdateThresholds)
    top = {k: convert(k, raw.pop(k)) for k in list(raw)}
    return TrackerConfig(
        solver=solver, transition=transition, thresholds=thresholds, **top
    )


def write_results_csv(results, path) -> None:
    """Persist per-frame tracker output; floats use repr for exact round-trip."""
    lines = [RESULTS_HEADER]
    for r in results:
        vals = (r.box.x, r.box.y, r.box.w, r.box.h,
                r.map_likelihood, r.occlusion_level)
        joined = ",".join(repr(float(v)) for v in vals)
        lines.append(f"{r.frame_index},{joined},{int(r.template_replaced)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_results_csv(path):
    """Rows of (frame, BoundingBox, likelihood, occlusion, replaced)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise ValueError(f"{path} is not a tracker results file")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise ValueError(f"{path} line {lineno}: expected 8 fields")
        frame = int(parts[0])
        box = BoundingBox(*(float(v) for v in parts[1:5]))
        rows.append((frame, box, float(parts[5]), float(parts[6]), bool(int(parts[7]))))
    return rows
