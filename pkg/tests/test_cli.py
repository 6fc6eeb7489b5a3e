import numpy as np
import pytest
from PIL import Image

from prpca.cli import run_cli
from prpca.metrics import BoundingBox
from prpca.sequence_io import read_results_csv


def write_square_sequence(dirpath, n=6, size=96, square=16, x0=10, y0=40):
    """Small synthetic sequence: bright square drifting right on noise."""
    rng = np.random.default_rng(5)
    gt_lines = []
    x = x0
    for k in range(n):
        frame = np.clip(rng.normal(0.08, 0.08, size=(size, size)), 0, 1)
        frame[y0:y0 + square, x:x + square] = 0.8
        Image.fromarray((frame * 255).astype(np.uint8)).save(
            dirpath / f"{k:03d}.png"
        )
        gt_lines.append(f"{x},{y0},{square},{square}")
        x += 2
    return gt_lines, BoundingBox(x0, y0, square, square)


CONFIG = """
template_count = 4
particle_count = 40
patch_w = 16
patch_h = 16
sigma_eps = 0.01
rng_seed = 7
solver.p = 0.5
solver.lambda_reg = 0.0625
solver.max_iter = 10
solver.mu_floor = 0.65
transition.var_h = 4.0
transition.var_w = 4.0
transition.var_scale = 0.0
transition.var_aspect = 0.0
transition.var_angle = 0.0
transition.var_skew = 0.0
thresholds.xi_star = 0.02
"""


@pytest.fixture()
def seq(tmp_path):
    seq_dir = tmp_path / "frames"
    seq_dir.mkdir()
    gt_lines, box = write_square_sequence(seq_dir)
    gt_path = tmp_path / "gt.txt"
    gt_path.write_text("\n".join(gt_lines) + "\n")
    cfg_path = tmp_path / "config.txt"
    cfg_path.write_text(CONFIG)
    return seq_dir, gt_path, cfg_path, box


class TestTrack:
    def test_track_writes_results_and_snapshot(self, seq, tmp_path):
        seq_dir, gt_path, cfg_path, box = seq
        out = tmp_path / "out"
        code = run_cli([
            "track", "--seq", str(seq_dir),
            "--box", f"{box.x},{box.y},{box.w},{box.h}",
            "--gt", str(gt_path), "--config", str(cfg_path),
            "--out", str(out),
        ])
        assert code == 0
        rows = read_results_csv(out / "results.csv")
        assert len(rows) == 6
        assert rows[0][0] == 1
        snapshot = (out / "config_snapshot.txt").read_text()
        assert "rng_seed = 7" in snapshot
        assert "solver.lambda_reg = 0.0625" in snapshot

    def test_track_repeat_is_byte_identical(self, seq, tmp_path):
        seq_dir, gt_path, cfg_path, box = seq
        args = ["track", "--seq", str(seq_dir),
                "--box", f"{box.x},{box.y},{box.w},{box.h}",
                "--config", str(cfg_path)]
        assert run_cli(args + ["--out", str(tmp_path / "a")]) == 0
        assert run_cli(args + ["--out", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a/results.csv").read_bytes() == \
            (tmp_path / "b/results.csv").read_bytes()

    def test_bad_box_flag(self, seq, tmp_path):
        seq_dir, _, cfg_path, _ = seq
        code = run_cli(["track", "--seq", str(seq_dir), "--box", "1,2,3",
                        "--out", str(tmp_path / "o")])
        assert code == 1

    def test_missing_sequence_dir(self, tmp_path):
        code = run_cli(["track", "--seq", str(tmp_path / "nope"),
                        "--box", "1,1,4,4", "--out", str(tmp_path / "o")])
        assert code == 1

    def test_unknown_config_key(self, seq, tmp_path):
        seq_dir, _, _, box = seq
        bad = tmp_path / "bad.txt"
        bad.write_text("no_such_key = 1\n")
        code = run_cli(["track", "--seq", str(seq_dir),
                        "--box", f"{box.x},{box.y},{box.w},{box.h}",
                        "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_snapshot_reproduces_run(self, seq, tmp_path):
        # the config snapshot written by `track` is sufficient to rerun
        seq_dir, _, cfg_path, box = seq
        box_arg = f"{box.x},{box.y},{box.w},{box.h}"
        out1 = tmp_path / "one"
        assert run_cli(["track", "--seq", str(seq_dir), "--box", box_arg,
                        "--config", str(cfg_path), "--out", str(out1)]) == 0
        out2 = tmp_path / "two"
        assert run_cli(["track", "--seq", str(seq_dir), "--box", box_arg,
                        "--config", str(out1 / "config_snapshot.txt"),
                        "--out", str(out2)]) == 0
        assert (out1 / "results.csv").read_bytes() == \
            (out2 / "results.csv").read_bytes()


class TestEvalPlot:
    def test_eval_perfect_results(self, tmp_path):
        gt = tmp_path / "gt.txt"
        boxes = [(10 + 2 * k, 40, 16, 16) for k in range(5)]
        gt.write_text("\n".join(f"{x},{y},{w},{h}" for x, y, w, h in boxes))
        results = tmp_path / "results.csv"
        lines = ["frame,x,y,w,h,likelihood,occlusion_level,template_replaced"]
        for k, (x, y, w, h) in enumerate(boxes, start=1):
            lines.append(f"{k},{float(x)!r},{float(y)!r},{float(w)!r},{float(h)!r},0.1,0.0,0")
        results.write_text("\n".join(lines) + "\n")
        out = tmp_path / "metrics"
        assert run_cli(["eval", "--results", str(results), "--gt", str(gt),
                        "--out", str(out)]) == 0
        summary = (out / "summary.csv").read_text()
        assert "mean_aos,1.0" in summary
        assert "mean_eps0,0.0" in summary
        assert (out / "per_frame.csv").is_file()
        assert (out / "precision_curve.csv").is_file()
        assert (out / "success_curve.csv").is_file()

    def test_eval_then_plot(self, tmp_path):
        self.test_eval_perfect_results(tmp_path)
        out = tmp_path / "plots"
        assert run_cli(["plot", "--curves", str(tmp_path / "metrics"),
                        "--out", str(out)]) == 0
        assert (out / "precision.png").stat().st_size > 0
        assert (out / "success.png").stat().st_size > 0

    def test_plot_empty_dir(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert run_cli(["plot", "--curves", str(tmp_path / "empty"),
                        "--out", str(tmp_path / "o")]) == 1

    def test_eval_count_mismatch(self, tmp_path):
        gt = tmp_path / "gt.txt"
        gt.write_text("1,1,4,4\n2,2,4,4\n")
        results = tmp_path / "results.csv"
        results.write_text(
            "frame,x,y,w,h,likelihood,occlusion_level,template_replaced\n"
            "1,1.0,1.0,4.0,4.0,0.1,0.0,0\n"
        )
        assert run_cli(["eval", "--results", str(results), "--gt", str(gt),
                        "--out", str(tmp_path / "o")]) == 1


class TestDecompose:
    def test_recovers_synthetic(self, tmp_path):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((64, 2))
        B = rng.standard_normal((64, 2))
        L0 = A @ B.T
        S0 = np.zeros((64, 64))
        idx = rng.choice(64 * 64, size=int(0.05 * 64 * 64), replace=False)
        S0.flat[idx] = rng.choice([-1.0, 1.0], size=len(idx)) * \
            rng.uniform(0.5, 1.5, size=len(idx))
        matrix = tmp_path / "m.txt"
        np.savetxt(matrix, L0 + S0)
        out = tmp_path / "dec"
        code = run_cli(["decompose", "--matrix", str(matrix), "--p", "1.0",
                        "--lambda", "0.125", "--out", str(out)])
        assert code == 0
        L = np.loadtxt(out / "L.txt")
        assert np.linalg.norm(L - L0) / np.linalg.norm(L0) < 1e-2
        diag = (out / "diagnostics.txt").read_text()
        assert "converged = true" in diag

    def test_missing_matrix(self, tmp_path):
        assert run_cli(["decompose", "--matrix", str(tmp_path / "no.txt"),
                        "--out", str(tmp_path / "o")]) == 1

    def test_bad_p(self, tmp_path):
        m = tmp_path / "m.txt"
        np.savetxt(m, np.eye(3))
        assert run_cli(["decompose", "--matrix", str(m), "--p", "2.0",
                        "--out", str(tmp_path / "o")]) == 1

    def test_unknown_subcommand(self):
        assert run_cli(["frobnicate"]) == 1
