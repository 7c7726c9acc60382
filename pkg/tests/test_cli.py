"""Command-line interface: config validation, error prefixes/exit codes,
and an end-to-end mini pipeline (synth -> train -> denoise -> eval -> fit)."""

import json
import math
import os

import numpy as np
import pytest

from c2denoise import cli
from c2denoise.c2 import C2Matrix, load_c2, save_c2
from c2denoise.errors import ConfigError


MINI_CONFIG = {
    "dataset": {
        "seed": 99,
        "n_frames": 48,
        "n_pixels": 400,
        "n_modes": 2,
        "mean_counts_per_pixel": None,
        "dynamics": [
            {"kind": "stationary_kww", "tau_c": 10.0, "gamma": 1.0},
            {"kind": "oscillatory", "tau_c": 10.0, "gamma": 1.0,
             "amp": 0.3, "omega": 0.5, "damping": 0.02},
        ],
        "n_per_dynamics": 3,
        "splits": {"train": 0.8, "val": 0.1, "test": 0.1},
        "augment": {"reverse": True, "subsample": [], "crop_size": 32,
                    "crop_stride": 16},
    },
    "train": {
        "learning_rate": 1e-3,
        "batch_size": 4,
        "max_epochs": 2,
        "early_stop_loss_threshold": 1e-6,
        "shuffle_seed": 1,
        "init_seed": 3,
        "channels": [1, 3, 6],
        "kernel_size": 3,
    },
    "eval": {"z": 1.96, "max_lag": 10, "ssim_threshold": 0.15},
    "paths": {"out_dir": "out"},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def config_path(workdir):
    path = workdir / "config.json"
    path.write_text(json.dumps(MINI_CONFIG, indent=1))
    return str(path)


@pytest.fixture(scope="module")
def dataset_dir(workdir, config_path):
    out = str(workdir / "dataset")
    assert cli.main(["synth", "--config", config_path, "--out", out]) == 0
    return out


@pytest.fixture(scope="module")
def checkpoint(workdir, config_path, dataset_dir):
    out = str(workdir / "run")
    code = cli.main(["train", "--config", config_path,
                     "--manifest", os.path.join(dataset_dir, "manifest.tsv"),
                     "--out", out])
    assert code == 0
    return os.path.join(out, "model.fcda")


class TestConfig:
    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"datasets": {}}))
        with pytest.raises(ConfigError, match="unknown section"):
            cli.load_config(str(path))

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"train": {"learning_rte": 0.1}}))
        with pytest.raises(ConfigError, match="learning_rte"):
            cli.load_config(str(path))

    def test_json_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "train": {,}\n}')
        with pytest.raises(ConfigError, match=r":2:"):
            cli.load_config(str(path))

    def test_invalid_split_sum_exits_nonzero(self, tmp_path, capsys):
        bad = json.loads(json.dumps(MINI_CONFIG))
        bad["dataset"]["splits"] = {"train": 0.9, "val": 0.2, "test": 0.1}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        code = cli.main(["synth", "--config", str(path),
                         "--out", str(tmp_path / "d")])
        assert code != 0
        assert "E_CONFIG" in capsys.readouterr().err


class TestSynth:
    def test_counts_printed(self, workdir, config_path, capsys):
        out = str(workdir / "dataset_counts")
        assert cli.main(["synth", "--config", config_path, "--out", out]) == 0
        stdout = capsys.readouterr().out
        for split in ("train:", "val:", "test:"):
            assert split in stdout

    def test_manifest_exists(self, dataset_dir):
        assert os.path.exists(os.path.join(dataset_dir, "manifest.tsv"))

    def test_rerun_is_byte_identical(self, workdir, config_path, dataset_dir):
        other = str(workdir / "dataset_again")
        assert cli.main(["synth", "--config", config_path, "--out", other]) == 0
        names = sorted(os.listdir(dataset_dir))
        assert names == sorted(os.listdir(other))
        for name in names:
            a = open(os.path.join(dataset_dir, name), "rb").read()
            b = open(os.path.join(other, name), "rb").read()
            assert a == b, f"{name} differs"


class TestTrain:
    def test_missing_manifest(self, config_path, tmp_path, capsys):
        code = cli.main(["train", "--config", config_path,
                         "--manifest", str(tmp_path / "nope.tsv"),
                         "--out", str(tmp_path)])
        assert code != 0
        assert "E_CONFIG" in capsys.readouterr().err

    def test_checkpoint_and_history_written(self, checkpoint):
        assert os.path.exists(checkpoint)
        history = os.path.join(os.path.dirname(checkpoint), "loss_history.csv")
        lines = open(history).read().strip().split("\n")
        assert lines[0] == "epoch,loss"
        assert len(lines) >= 2

    def test_seed_repeat_gives_identical_checkpoint(self, workdir, config_path,
                                                    dataset_dir):
        manifest = os.path.join(dataset_dir, "manifest.tsv")
        outs = []
        for name in ("r1", "r2"):
            out = str(workdir / name)
            assert cli.main(["train", "--config", config_path,
                             "--manifest", manifest, "--seed", "42",
                             "--out", out]) == 0
            outs.append(open(os.path.join(out, "model.fcda"), "rb").read())
        assert outs[0] == outs[1]


class TestDenoise:
    def test_output_readable_and_t_preserved(self, workdir, checkpoint,
                                             dataset_dir):
        rec = [l.split("\t") for l in
               open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()][0]
        raw_path = os.path.join(dataset_dir, rec[2])
        out_path = str(workdir / "denoised.c2f")
        assert cli.main(["denoise", checkpoint, raw_path, out_path]) == 0
        raw = load_c2(raw_path)
        den = load_c2(out_path)
        assert den.n_frames == raw.n_frames
        assert np.array_equal(den.values, den.values.T)

    def test_output_accepted_as_input(self, workdir, checkpoint):
        first = str(workdir / "denoised.c2f")
        second = str(workdir / "denoised2.c2f")
        assert cli.main(["denoise", checkpoint, first, second]) == 0
        assert load_c2(second).n_frames == load_c2(first).n_frames

    def test_bad_checkpoint_path(self, workdir, capsys):
        code = cli.main(["denoise", str(workdir / "nope.fcda"),
                         str(workdir / "denoised.c2f"),
                         str(workdir / "x.c2f")])
        assert code != 0

    def test_truth_changes_less_than_raw(self, workdir, desk):
        # a properly trained denoiser perturbs a noise-free map less than
        # its noisy counterpart; uses the desk-scale checkpoint
        rec = desk.records[0]
        raw_path = os.path.join(desk.dataset_dir, rec.raw_path)
        truth_path = os.path.join(desk.dataset_dir, rec.truth_path)
        den_raw = str(workdir / "ord_raw.c2f")
        den_truth = str(workdir / "ord_truth.c2f")
        assert cli.main(["denoise", desk.checkpoint_path, raw_path, den_raw]) == 0
        assert cli.main(["denoise", desk.checkpoint_path, truth_path,
                         den_truth]) == 0
        raw = load_c2(raw_path).values
        truth = load_c2(truth_path).values
        change_raw = np.mean((load_c2(den_raw).values - raw) ** 2)
        change_truth = np.mean((load_c2(den_truth).values - truth) ** 2)
        assert change_truth < change_raw


class TestEval:
    def test_identical_pair(self, workdir, dataset_dir, capsys):
        rec = [l.split("\t") for l in
               open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()][0]
        raw_path = os.path.join(dataset_dir, rec[2])
        out = str(workdir / "eval_self.json")
        assert cli.main(["eval", raw_path, raw_path, "--out", out]) == 0
        report = json.load(open(out))
        assert report["delta_beta_rel"] == 0.0
        assert report["ssim"] == pytest.approx(1.0, abs=1e-9)
        assert report["acf_pass"] is True
        t = load_c2(raw_path).n_frames
        assert report["acf_bound"] == pytest.approx(1.96 / math.sqrt(t))

    def test_real_pair_all_fields_finite(self, workdir, dataset_dir,
                                         checkpoint):
        rec = [l.split("\t") for l in
               open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()][1]
        raw_path = os.path.join(dataset_dir, rec[2])
        den_path = str(workdir / "eval_den.c2f")
        assert cli.main(["denoise", checkpoint, raw_path, den_path]) == 0
        out = str(workdir / "eval_pair.json")
        assert cli.main(["eval", raw_path, den_path, "--out", out]) == 0
        report = json.load(open(out))
        for key in ("beta_obs_raw", "beta_obs_denoised", "delta_beta_rel",
                    "ssim", "snr_raw", "snr_denoised"):
            assert np.isfinite(report[key]), key

    def test_shape_mismatch_exits_nonzero(self, workdir, dataset_dir, capsys):
        recs = [l.split("\t") for l in
                open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()]
        small = str(workdir / "small.c2f")
        rng = np.random.default_rng(0)
        m = rng.normal(size=(20, 20))
        save_c2(small, C2Matrix(1.0 + (m + m.T) / 2))
        raw_path = os.path.join(dataset_dir, recs[0][2])
        code = cli.main(["eval", raw_path, small])
        assert code != 0
        assert "E_SHAPE" in capsys.readouterr().err


class TestFit:
    def test_trace_csv_written(self, workdir, dataset_dir):
        rec = [l.split("\t") for l in
               open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()][0]
        truth_path = os.path.join(dataset_dir, rec[3])
        out = str(workdir / "trace.csv")
        assert cli.main(["fit", truth_path, "--model", "kww",
                         "--out", out]) == 0
        lines = open(out).read().strip().split("\n")
        assert lines[0].startswith("age_index,c_inf,beta,tau_c,gamma")
        assert len(lines) > 2

    def test_edge_exclude_shrinks_band(self, workdir, dataset_dir):
        rec = [l.split("\t") for l in
               open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()][0]
        truth_path = os.path.join(dataset_dir, rec[3])
        narrow = str(workdir / "narrow.csv")
        wide = str(workdir / "wide.csv")
        assert cli.main(["fit", truth_path, "--out", wide,
                         "--edge-exclude", "0.1"]) == 0
        assert cli.main(["fit", truth_path, "--out", narrow,
                         "--edge-exclude", "0.2"]) == 0
        n_wide = len(open(wide).read().strip().split("\n")) - 1
        n_narrow = len(open(narrow).read().strip().split("\n")) - 1
        assert n_narrow < n_wide

    def test_svg_emitted(self, workdir, dataset_dir):
        rec = [l.split("\t") for l in
               open(os.path.join(dataset_dir, "manifest.tsv")).read().splitlines()][0]
        truth_path = os.path.join(dataset_dir, rec[3])
        svg = str(workdir / "trace.svg")
        assert cli.main(["fit", truth_path, "--out", str(workdir / "t.csv"),
                         "--svg", svg]) == 0
        head = open(svg).read(200)
        assert "<svg" in head or "<?xml" in head


class TestEnsembleCommand:
    def test_single_seed_rejected(self, config_path, dataset_dir, capsys):
        code = cli.main(["ensemble", "--config", config_path,
                         "--manifest", os.path.join(dataset_dir, "manifest.tsv"),
                         "--seeds", "1"])
        assert code != 0
        assert "need >= 2 models" in capsys.readouterr().err

    def test_report_fields(self, workdir, config_path, dataset_dir):
        out = str(workdir / "ens")
        code = cli.main(["ensemble", "--config", config_path,
                         "--manifest", os.path.join(dataset_dir, "manifest.tsv"),
                         "--seeds", "1,2", "--out", out])
        assert code == 0
        report = json.load(open(os.path.join(out, "ensemble.json")))
        for key in ("per_sample_variance", "mean_variance", "median_ratio",
                    "p10_ratio", "p90_ratio"):
            assert key in report
        assert all(v >= 0 for v in report["per_sample_variance"])
        assert "generated_at" not in report  # timestamps default off


class TestHelp:
    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for sub in ("synth", "train", "denoise", "eval", "fit",
                    "bootstrap-study", "ensemble"):
            assert sub in out
