import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from gpdeconv import fileio
from gpdeconv.cli import main


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


SAMPLE_CONFIG = {
    "kernel": {"type": "se", "sigma": 1.0, "rate": 10.0},
    "filter": {"type": "se", "sigma": 1.0, "rate": 10.0},
    "method": "analytic",
    "source_grid": {"start": 0.0, "stop": 10.0, "num": 40},
    "conv_grid": {"start": 0.0, "stop": 10.0, "num": 150},
    "noise_variance": 0.0001,
    "seed": 7,
}


def tree_digest(directory):
    """Byte-level digest of every file under a directory."""
    digest = {}
    for path in sorted(Path(directory).rglob("*")):
        if path.is_file():
            digest[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return digest


@pytest.fixture()
def sample_run(tmp_path):
    config = write_config(tmp_path, "sample.json", SAMPLE_CONFIG)
    out = tmp_path / "sample_out"
    assert main(["sample", "--config", config, "--out", str(out)]) == 0
    return out


class TestSample:
    def test_row_counts_match_grids(self, sample_run):
        source = fileio.read_csv(sample_run / "sample_source.csv")
        conv = fileio.read_csv(sample_run / "sample_convolution.csv")
        assert source["t"].size == 40
        assert conv["t"].size == 150
        assert set(conv) == {"t", "f", "y", "f_std_given_x"}

    def test_empty_grid_is_config_error(self, tmp_path):
        payload = dict(SAMPLE_CONFIG, source_grid={"start": 0.0, "stop": 1.0, "num": 0})
        config = write_config(tmp_path, "bad.json", payload)
        assert main(["sample", "--config", config, "--out", str(tmp_path)]) == 2

    def test_unknown_key_rejected(self, tmp_path):
        payload = dict(SAMPLE_CONFIG, typo_key=1)
        config = write_config(tmp_path, "bad.json", payload)
        assert main(["sample", "--config", config, "--out", str(tmp_path)]) == 2

    def test_seed_override_changes_output(self, tmp_path, sample_run):
        config = write_config(tmp_path, "sample.json", SAMPLE_CONFIG)
        out = tmp_path / "other"
        assert main(["sample", "--config", config, "--seed", "8",
                     "--out", str(out)]) == 0
        a = (sample_run / "sample_source.csv").read_bytes()
        b = (out / "sample_source.csv").read_bytes()
        assert a != b


class TestDeconv:
    def test_pipeline_and_report(self, tmp_path, sample_run):
        config = write_config(tmp_path, "deconv.json", {
            "kernel": SAMPLE_CONFIG["kernel"], "filter": SAMPLE_CONFIG["filter"],
            "method": "analytic", "noise_variance": 0.0001,
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 60},
        })
        out = tmp_path / "deconv_out"
        code = main(["deconv", "--config", config,
                     "--input", str(sample_run / "sample_convolution.csv"),
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "deconv_report.json").read_text())
        assert report["diagnostic"]["recoverable"] is True
        posterior = fileio.read_csv(out / "posterior.csv")
        assert set(posterior) == {"t", "mean", "std"}
        assert posterior["t"].size == 60

    def test_suppressed_band_reported(self, tmp_path, sample_run):
        config = write_config(tmp_path, "deconv.json", {
            "kernel": {"type": "sinc", "sigma": 1.0, "width": 2.0},
            "filter": {"type": "sinc", "sigma": 1.0, "width": 1.0},
            "method": "analytic", "noise_variance": 0.01,
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 20},
        })
        out = tmp_path / "deconv_out"
        assert main(["deconv", "--config", config,
                     "--input", str(sample_run / "sample_convolution.csv"),
                     "--out", str(out)]) == 0
        report = json.loads((out / "deconv_report.json").read_text())
        lo, hi = report["diagnostic"]["suppressed_band"]
        assert 0.5 < lo < 0.6
        assert 0.95 <= hi <= 1.0

    def test_malformed_csv_exit_code_and_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,y\n0.0,1.0\n0.5,oops\n")
        config = write_config(tmp_path, "deconv.json", {
            "kernel": SAMPLE_CONFIG["kernel"], "filter": SAMPLE_CONFIG["filter"],
            "method": "analytic", "query_grid": {"start": 0, "stop": 1, "num": 4},
        })
        assert main(["deconv", "--config", config, "--input", str(bad),
                     "--out", str(tmp_path)]) == 2
        assert "line 3" in capsys.readouterr().err


class TestTrain:
    def test_fit_report_has_nondecreasing_trace(self, tmp_path, sample_run):
        config = write_config(tmp_path, "train.json", {
            "mode": "fit",
            "kernel": {"type": "se", "sigma": 1.0, "lengthscale": 0.3},
            "filter": SAMPLE_CONFIG["filter"], "method": "analytic",
            "free_source": ["sigma", "lengthscale"],
            "noise_variance": 0.01,
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 30},
            "optimizer": {"max_iters": 120, "restarts": 1, "seed": 3},
        })
        out = tmp_path / "train_out"
        assert main(["train", "--config", config,
                     "--input", str(sample_run / "sample_convolution.csv"),
                     "--out", str(out)]) == 0
        report = json.loads((out / "fit_report.json").read_text())
        trace = report["trace"]
        assert all(b >= a for a, b in zip(trace, trace[1:]))
        assert report["log_likelihood"] == trace[-1]

    def test_blind_writes_learned_taps(self, tmp_path, sample_run):
        config = write_config(tmp_path, "train.json", {
            "mode": "blind", "source_family": "se", "taps": 5,
            "span": [-0.25, 0.25],
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 30},
            "optimizer": {"max_iters": 200, "restarts": 1, "seed": 3},
        })
        out = tmp_path / "train_out"
        assert main(["train", "--config", config,
                     "--input", str(sample_run / "sample_convolution.csv"),
                     "--out", str(out)]) == 0
        report = json.loads((out / "fit_report.json").read_text())
        assert report["filter"]["type"] == "discrete"
        assert len(report["filter"]["weights"]) == 5

    def test_zero_restarts_rejected(self, tmp_path, sample_run):
        config = write_config(tmp_path, "train.json", {
            "mode": "blind", "source_family": "se", "taps": 3,
            "span": [-0.2, 0.2],
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 10},
            "optimizer": {"restarts": 0},
        })
        assert main(["train", "--config", config,
                     "--input", str(sample_run / "sample_convolution.csv"),
                     "--out", str(tmp_path)]) == 2


class TestImage:
    @pytest.fixture()
    def truth_csv(self, tmp_path):
        rng = np.random.default_rng(0)
        yy, xx = np.meshgrid(np.arange(10), np.arange(10), indexing="ij")
        image = 0.5 + 0.3 * np.sin(xx / 2.0) * np.cos(yy / 2.5)
        path = tmp_path / "truth.csv"
        fileio.write_matrix_csv(path, image)
        return path

    def test_identity_filter_noiseless_full_mask(self, tmp_path, truth_csv):
        config = write_config(tmp_path, "image.json", {
            "filter": {"type": "discrete", "dim": 2, "weights": [1.0],
                       "grid_shape": [1, 1], "grid_step": 1.0},
            "kernel": {"type": "se", "sigma": 0.3, "lengthscale": 2.0, "dim": 2},
            "fit_kernel": False, "noise_sigma": 0.0, "observed_fraction": 1.0,
            "seed": 1,
        })
        out = tmp_path / "image_out"
        assert main(["image", "--config", config, "--input", str(truth_csv),
                     "--out", str(out), "--no-plot"]) == 0
        truth = fileio.read_matrix_csv(truth_csv)
        recon = fileio.read_matrix_csv(out / "image_gpdc.csv")
        np.testing.assert_allclose(recon, truth, atol=1e-8)

    def test_mask_pixel_count_rule(self, tmp_path, truth_csv):
        config = write_config(tmp_path, "image.json", {
            "filter": {"name": "h0"},
            "kernel": {"type": "se", "sigma": 0.3, "lengthscale": 2.0, "dim": 2},
            "fit_kernel": False, "noise_sigma": 0.01, "observed_fraction": 0.6,
            "seed": 2,
        })
        out = tmp_path / "image_out"
        assert main(["image", "--config", config, "--input", str(truth_csv),
                     "--out", str(out), "--no-plot"]) == 0
        report = json.loads((out / "image_report.json").read_text())
        assert report["observed_pixels"] == round(0.6 * 100)

    def test_non_rectangular_csv_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1.0,2.0\n3.0\n")
        config = write_config(tmp_path, "image.json", {
            "filter": {"name": "h0"},
            "kernel": {"type": "se", "sigma": 0.3, "lengthscale": 2.0, "dim": 2},
            "fit_kernel": False, "noise_sigma": 0.0, "observed_fraction": 1.0,
        })
        assert main(["image", "--config", config, "--input", str(bad),
                     "--out", str(tmp_path)]) == 2

    def test_pgm_input(self, tmp_path, truth_csv):
        image = fileio.read_matrix_csv(truth_csv)
        pgm = tmp_path / "truth.pgm"
        fileio.write_pgm(pgm, image)
        config = write_config(tmp_path, "image.json", {
            "filter": {"name": "h2"},
            "kernel": {"type": "se", "sigma": 0.3, "lengthscale": 2.0, "dim": 2},
            "fit_kernel": False, "noise_sigma": 0.01, "observed_fraction": 0.5,
            "seed": 3,
        })
        out = tmp_path / "image_out"
        assert main(["image", "--config", config, "--input", str(pgm),
                     "--out", str(out), "--no-plot"]) == 0
        assert (out / "image_gpdc.pgm").exists()


class TestEvaluate:
    def test_identical_files_zero_metrics(self, tmp_path, sample_run):
        out = tmp_path / "eval_out"
        source = str(sample_run / "sample_source.csv")
        assert main(["evaluate", "--truth", source, "--estimate", source,
                     "--out", str(out)]) == 0
        result = json.loads((out / "metrics.json").read_text())
        assert set(result) == {"mse_time", "mse_psd", "kl_psd", "wasserstein_psd"}
        assert all(v == 0.0 for v in result.values())

    def test_length_mismatch_is_usage_error(self, tmp_path, sample_run):
        short = tmp_path / "short.csv"
        fileio.write_csv(short, [("t", np.arange(3.0)), ("x", np.zeros(3))])
        assert main(["evaluate", "--truth", str(sample_run / "sample_source.csv"),
                     "--estimate", str(short), "--out", str(tmp_path)]) == 2


class TestBaselineCommand:
    def test_wiener_and_inverse_columns(self, tmp_path, sample_run):
        config = write_config(tmp_path, "baseline.json", {
            "filter": SAMPLE_CONFIG["filter"], "method": "both",
            "noise_to_signal": 0.01,
        })
        out = tmp_path / "baseline_out"
        assert main(["baseline", "--config", config,
                     "--input", str(sample_run / "sample_convolution.csv"),
                     "--out", str(out)]) == 0
        table = fileio.read_csv(out / "baseline.csv")
        assert {"t", "wiener", "inverse_ft"} <= set(table)


class TestDeterminism:
    def test_every_command_twice_is_byte_identical(self, tmp_path):
        sample_cfg = write_config(tmp_path, "sample.json", SAMPLE_CONFIG)
        deconv_cfg = write_config(tmp_path, "deconv.json", {
            "kernel": SAMPLE_CONFIG["kernel"], "filter": SAMPLE_CONFIG["filter"],
            "method": "analytic", "noise_variance": 0.0001,
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 40},
        })
        train_cfg = write_config(tmp_path, "train.json", {
            "mode": "fit", "kernel": {"type": "se", "sigma": 1.0, "lengthscale": 0.3},
            "filter": SAMPLE_CONFIG["filter"], "method": "analytic",
            "free_source": ["lengthscale"], "noise_variance": 0.01,
            "query_grid": {"start": 0.0, "stop": 10.0, "num": 20},
            "optimizer": {"max_iters": 60, "restarts": 2, "seed": 5},
        })
        rng = np.random.default_rng(1)
        image = 0.5 + 0.2 * rng.standard_normal((8, 8))
        image_path = tmp_path / "img.csv"
        fileio.write_matrix_csv(image_path, np.clip(image, 0, 1))
        image_cfg = write_config(tmp_path, "image.json", {
            "filter": {"name": "h3"}, "noise_sigma": 0.02,
            "kernel": {"type": "se", "sigma": 0.2, "lengthscale": 1.5, "dim": 2},
            "fit_kernel": False, "observed_fraction": 0.7, "seed": 9,
        })
        baseline_cfg = write_config(tmp_path, "baseline.json", {
            "filter": SAMPLE_CONFIG["filter"], "method": "both",
        })
        diagnose_cfg = write_config(tmp_path, "diag.json", {
            "kernel": {"type": "sinc", "sigma": 1.0, "width": 2.0},
            "filter": {"type": "sinc", "sigma": 1.0, "width": 1.0},
            "freq_max": 2.0,
        })

        def run_all(base):
            base.mkdir()
            sample_out = base / "sample"
            assert main(["sample", "--config", sample_cfg, "--out",
                         str(sample_out)]) == 0
            conv_csv = str(sample_out / "sample_convolution.csv")
            source_csv = str(sample_out / "sample_source.csv")
            assert main(["deconv", "--config", deconv_cfg, "--input", conv_csv,
                         "--out", str(base / "deconv")]) == 0
            assert main(["train", "--config", train_cfg, "--input", conv_csv,
                         "--out", str(base / "train")]) == 0
            assert main(["image", "--config", image_cfg, "--input",
                         str(image_path), "--out", str(base / "image")]) == 0
            assert main(["baseline", "--config", baseline_cfg, "--input",
                         conv_csv, "--out", str(base / "baseline")]) == 0
            assert main(["evaluate", "--truth", source_csv, "--estimate",
                         source_csv, "--out", str(base / "evaluate")]) == 0
            assert main(["diagnose", "--config", diagnose_cfg,
                         "--out", str(base / "diagnose")]) == 0
            return tree_digest(base)

        first = run_all(tmp_path / "run_a")
        second = run_all(tmp_path / "run_b")
        assert first == second
