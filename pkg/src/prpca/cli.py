"""Command-line surface: track, eval, plot and decompose subcommands.

Exit codes: 0 success, 1 input error (files, flags, formats), 2 numeric
failure.  Set PRPCA_VERBOSE=1 for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .admm import SolverConfig, SolverDivergenceError, decompose
from .metrics import (
    DEFAULT_PRECISION_THRESHOLDS,
    DEFAULT_SUCCESS_THRESHOLDS,
    BoundingBox,
    center_distance_px,
    precision_curve,
    success_curve,
    summarize,
)
from .sequence_io import (
    format_config,
    iter_frames,
    load_sequence,
    parse_config,
    parse_gt,
    read_results_csv,
    write_results_csv,
)
from .tracker import TrackerConfig, track_sequence

log = logging.getLogger("prpca")


class CliInputError(Exception):
    """User-facing input problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliInputError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="prpca", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser("track", help="run the tracker over a frame directory")
    track.add_argument("--seq", required=True, help="directory of ordered frames")
    track.add_argument("--box", required=True, help="first-frame target box X,Y,W,H")
    track.add_argument("--gt", help="optional ground-truth file (copied for eval)")
    track.add_argument("--config", help="flat key=value config file")
    track.add_argument("--out", required=True, help="output directory")

    ev = sub.add_parser("eval", help="score a results CSV against ground truth")
    ev.add_argument("--results", required=True, help="results.csv from `track`")
    ev.add_argument("--gt", required=True, help="ground-truth rectangles")
    ev.add_argument("--out", required=True, help="output directory")

    plot = sub.add_parser("plot", help="render precision/success curve images")
    plot.add_argument("--curves", required=True, help="directory with curve CSVs")
    plot.add_argument("--out", required=True, help="output directory")

    dec = sub.add_parser("decompose", help="run the raw solver on a text matrix")
    dec.add_argument("--matrix", required=True, help="dense matrix, one row per line")
    dec.add_argument("--p", type=float, default=0.5, help="shrinkage exponent in [0,1]")
    dec.add_argument("--lambda", dest="lambda_reg", type=float, default=None)
    dec.add_argument("--rho", type=float, default=0.9)
    dec.add_argument("--mu0", type=float, default=None)
    dec.add_argument("--tol", type=float, default=1e-5)
    dec.add_argument("--max-iter", type=int, default=500)
    dec.add_argument("--out", required=True, help="output directory")
    return parser


def _parse_box(text: str) -> BoundingBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise CliInputError(f"--box expects X,Y,W,H, got {text!r}")
    try:
        return BoundingBox(*(float(v) for v in parts))
    except ValueError as err:
        raise CliInputError(f"bad --box value: {err}") from err


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_track(args) -> int:
    out = _out_dir(args.out)
    cfg = TrackerConfig()
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            raise CliInputError(f"config file not found: {cfg_path}")
        try:
            cfg = parse_config(cfg_path.read_text())
        except (ValueError, TypeError) as err:
            raise CliInputError(f"bad config: {err}") from err
    manifest = load_sequence(args.seq, args.gt)
    box = _parse_box(args.box)
    log.info("tracking %s: %d frames", manifest.name, len(manifest.paths))
    results = track_sequence(iter_frames(manifest), box, cfg)
    write_results_csv(results, out / "results.csv")
    (out / "config_snapshot.txt").write_text(format_config(cfg))
    log.info("wrote %s", out / "results.csv")
    return 0


def _cmd_eval(args) -> int:
    out = _out_dir(args.out)
    results_path = Path(args.results)
    if not results_path.is_file():
        raise CliInputError(f"results file not found: {results_path}")
    gt_path = Path(args.gt)
    if not gt_path.is_file():
        raise CliInputError(f"ground-truth file not found: {gt_path}")
    rows = read_results_csv(results_path)
    gt = parse_gt(gt_path.read_text())
    if len(rows) != len(gt):
        raise CliInputError(
            f"{len(rows)} result rows vs {len(gt)} ground-truth boxes"
        )
    pred = [box for (_, box, _, _, _) in rows]
    metrics = summarize(pred, gt)
    dist_px = [center_distance_px(p, g) for p, g in zip(pred, gt)]
    prec = precision_curve(dist_px)
    succ = success_curve(metrics.per_frame_aos)

    per_frame = ["frame,x,y,w,h,eps0,aos"]
    for (frame, box, _, _, _), e0, ov in zip(rows, metrics.per_frame_eps0,
                                             metrics.per_frame_aos):
        vals = ",".join(repr(float(v)) for v in (box.x, box.y, box.w, box.h, e0, ov))
        per_frame.append(f"{frame},{vals}")
    (out / "per_frame.csv").write_text("\n".join(per_frame) + "\n")

    for name, thresholds, curve in (
        ("precision_curve.csv", DEFAULT_PRECISION_THRESHOLDS, prec),
        ("success_curve.csv", DEFAULT_SUCCESS_THRESHOLDS, succ),
    ):
        lines = ["threshold,value"]
        lines += [f"{float(t)!r},{float(v)!r}" for t, v in zip(thresholds, curve)]
        (out / name).write_text("\n".join(lines) + "\n")

    (out / "summary.csv").write_text(
        "metric,value\n"
        f"mean_eps0,{float(metrics.mean_eps0)!r}\n"
        f"mean_aos,{float(metrics.mean_aos)!r}\n"
        f"frames,{len(rows)}\n"
    )
    print(f"mean_eps0={metrics.mean_eps0:.6f} mean_aos={metrics.mean_aos:.6f}")
    return 0


def _read_curve(path: Path):
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "threshold,value":
        raise CliInputError(f"{path} is not a curve file")
    pts = [tuple(float(v) for v in line.split(",")) for line in lines[1:] if line]
    return np.array(pts)


def _cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves_dir = Path(args.curves)
    out = _out_dir(args.out)
    specs = (
        ("precision_curve.csv", "precision.png", "center error threshold (px)",
         "precision", (0.0, 50.0)),
        ("success_curve.csv", "success.png", "overlap threshold",
         "success rate", (0.0, 1.0)),
    )
    made = 0
    for csv_name, png_name, xlabel, ylabel, xlim in specs:
        src = curves_dir / csv_name
        if not src.is_file():
            continue
        pts = _read_curve(src)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(pts[:, 0], pts[:, 1], lw=2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_xlim(*xlim)
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.4)
        fig.tight_layout()
        fig.savefig(out / png_name, dpi=120)
        plt.close(fig)
        made += 1
    if made == 0:
        raise CliInputError(f"no curve CSVs found in {curves_dir}")
    return 0


def _cmd_decompose(args) -> int:
    matrix_path = Path(args.matrix)
    if not matrix_path.is_file():
        raise CliInputError(f"matrix file not found: {matrix_path}")
    try:
        M = np.loadtxt(matrix_path, ndmin=2)
    except ValueError as err:
        raise CliInputError(f"bad matrix file: {err}") from err
    try:
        cfg = SolverConfig(
            p=args.p, rho=args.rho, mu0=args.mu0,
            lambda_reg=args.lambda_reg, tol=args.tol, max_iter=args.max_iter,
        )
    except ValueError as err:
        raise CliInputError(str(err)) from err
    d = decompose(M, cfg)
    out = _out_dir(args.out)
    np.savetxt(out / "L.txt", d.low_rank)
    np.savetxt(out / "S.txt", d.sparse)
    (out / "diagnostics.txt").write_text(
        f"iterations = {d.iterations}\n"
        f"final_residual = {d.final_residual!r}\n"
        f"converged = {str(d.converged).lower()}\n"
    )
    print(f"converged={d.converged} iterations={d.iterations} "
          f"residual={d.final_residual:.3e}")
    return 0


def run_cli(argv) -> int:
    logging.basicConfig(
        level=logging.INFO if os.environ.get("PRPCA_VERBOSE") else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "track": _cmd_track,
            "eval": _cmd_eval,
            "plot": _cmd_plot,
            "decompose": _cmd_decompose,
        }[args.command]
        return handler(args)
    except CliInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (SolverDivergenceError, FloatingPointError, np.linalg.LinAlgError,
            RuntimeError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
