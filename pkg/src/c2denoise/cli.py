"""Command-line orchestrator.

Subcommands: synth, train, denoise, eval, fit, bootstrap-study, ensemble.
Configuration is a JSON file with four sections (dataset, train, eval,
paths); unknown keys are rejected.  Flags override config values.  All
errors go to stderr with a machine-greppable prefix (E_CONFIG, E_FORMAT,
E_SHAPE, E_NUMERIC) and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import c2 as c2mod
from . import fcdae, fitdyn, metrics, synth
from .errors import (C2DenoiseError, ConfigError, FormatError, NumericError,
                     ShapeError)

__all__ = ["main", "load_config", "RunConfig"]

_DATASET_KEYS = {
    "seed", "n_frames", "frame_interval_s", "n_pixels", "n_modes",
    "mean_counts_per_pixel", "dynamics", "n_per_dynamics", "splits",
    "augment", "save_pixel_series", "repair_raw_diagonal",
}
_AUGMENT_KEYS = {"reverse", "subsample", "crop_size", "crop_stride"}
_DYNAMICS_KEYS = {
    "kind", "tau_c", "gamma", "aging_exponent", "amp", "omega", "damping",
    "tau_c2", "gamma2", "weight",
}
_TRAIN_KEYS = {
    "learning_rate", "beta1", "beta2", "batch_size", "max_epochs",
    "early_stop_loss_threshold", "shuffle_seed", "init_seed", "channels",
    "kernel_size",
}
_EVAL_KEYS = {"z", "max_lag", "ssim_threshold"}
_PATHS_KEYS = {"out_dir"}
_SECTION_KEYS = {"dataset": _DATASET_KEYS, "train": _TRAIN_KEYS,
                 "eval": _EVAL_KEYS, "paths": _PATHS_KEYS}

DEFAULT_FRACTIONS = (1.0, 0.5, 0.25, 0.10, 0.05)


class RunConfig:
    """Validated view of the JSON configuration file."""

    def __init__(self, raw: dict, source: str = "<config>"):
        self.source = source
        unknown = set(raw) - set(_SECTION_KEYS)
        if unknown:
            raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
        for section, allowed in _SECTION_KEYS.items():
            body = raw.get(section, {})
            if not isinstance(body, dict):
                raise ConfigError(f"{source}: section {section!r} must be an object")
            bad = set(body) - allowed
            if bad:
                raise ConfigError(
                    f"{source}: unknown key(s) {sorted(bad)} in section {section!r}")
        aug = raw.get("dataset", {}).get("augment", {})
        bad = set(aug) - _AUGMENT_KEYS
        if bad:
            raise ConfigError(
                f"{source}: unknown key(s) {sorted(bad)} in dataset.augment")
        for spec in raw.get("dataset", {}).get("dynamics", []):
            bad = set(spec) - _DYNAMICS_KEYS
            if bad:
                raise ConfigError(
                    f"{source}: unknown key(s) {sorted(bad)} in a dynamics spec")
        self.dataset = dict(raw.get("dataset", {}))
        self.train = dict(raw.get("train", {}))
        self.eval = dict(raw.get("eval", {}))
        self.paths = dict(raw.get("paths", {}))

    def dynamics_specs(self):
        specs = [synth.DynamicsSpec(**d) for d in self.dataset.get("dynamics", [])]
        if not specs:
            raise ConfigError(f"{self.source}: dataset.dynamics must list at least one spec")
        return specs

    def dataset_config(self, seed_override=None) -> synth.DatasetConfig:
        d = self.dataset
        aug = d.get("augment", {})
        splits = d.get("splits", {"train": 0.8, "val": 0.1, "test": 0.1})
        if isinstance(splits, dict):
            splits = (splits.get("train", 0.0), splits.get("val", 0.0),
                      splits.get("test", 0.0))
        return synth.DatasetConfig(
            dynamics=self.dynamics_specs(),
            n_frames=int(d.get("n_frames", 128)),
            frame_interval_s=float(d.get("frame_interval_s", 1.0)),
            n_pixels=int(d.get("n_pixels", 4000)),
            n_modes=int(d.get("n_modes", 2)),
            mean_counts_per_pixel=d.get("mean_counts_per_pixel", 5.0),
            n_per_dynamics=int(d.get("n_per_dynamics", 2)),
            splits=tuple(float(s) for s in splits),
            reverse=bool(aug.get("reverse", True)),
            subsample=tuple(int(k) for k in aug.get("subsample", (2,))),
            crop_size=aug.get("crop_size", 64),
            crop_stride=int(aug.get("crop_stride", 48)),
            repair_raw_diagonal=bool(d.get("repair_raw_diagonal", True)),
            save_pixel_series=bool(d.get("save_pixel_series", False)),
            seed=int(seed_override if seed_override is not None else d.get("seed", 0)),
        )

    def train_config(self) -> fcdae.TrainConfig:
        t = self.train
        return fcdae.TrainConfig(
            learning_rate=float(t.get("learning_rate", 1e-3)),
            beta1=float(t.get("beta1", 0.9)),
            beta2=float(t.get("beta2", 0.999)),
            batch_size=int(t.get("batch_size", 8)),
            max_epochs=int(t.get("max_epochs", 30)),
            early_stop_loss_threshold=float(t.get("early_stop_loss_threshold", 1e-3)),
            shuffle_seed=int(t.get("shuffle_seed", 0)),
        )

    def architecture(self) -> fcdae.FcDaeArchitecture:
        t = self.train
        return fcdae.FcDaeArchitecture(
            encoder_out_channels=tuple(t.get("channels", (1, 4, 8, 16, 32))),
            kernel_size=int(t.get("kernel_size", 3)),
        )

    def eval_params(self):
        e = self.eval
        return (float(e.get("z", metrics.DEFAULT_Z)),
                int(e.get("max_lag", metrics.DEFAULT_MAX_LAG)),
                float(e.get("ssim_threshold", metrics.DEFAULT_SSIM_THRESHOLD)))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return RunConfig(raw, source=path)


def _write_text(path: str, text: str) -> None:
    c2mod.atomic_write_bytes(path, text.encode("utf-8"))


def _write_json(path: str, payload: dict, timestamps: bool) -> None:
    if timestamps:
        payload = dict(payload)
        payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _plot_g2_overlay(path, lags, raw_values, denoised_values, truth_values=None,
                     title=""):
    """Best-effort SVG overlay: raw points, denoised line, truth dashed."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(lags, raw_values, "o", ms=2.5, color="#7fb2d6", label="raw")
    ax.plot(lags, denoised_values, "-", color="#e07b39", lw=1.5, label="denoised")
    if truth_values is not None:
        ax.plot(lags, truth_values, "--", color="#3b5b92", lw=1.2, label="truth")
    ax.set_xlabel("lag (frames)")
    ax.set_ylabel("g2")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_traces(path, traces, title=""):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(traces.param_names) + ["r_squared"]
    fig, axes = plt.subplots(len(names), 1, figsize=(5, 1.6 * len(names)),
                             sharex=True)
    for ax, name in zip(axes, names):
        if name == "r_squared":
            ax.plot(traces.ages, traces.r_squared_trace(), color="#e07b39")
        else:
            vals = traces.param_trace(name)
            sig = traces.sigma_trace(name)
            ax.plot(traces.ages, vals, color="#3b5b92")
            ax.fill_between(traces.ages, vals - sig, vals + sig,
                            color="#3b5b92", alpha=0.25, linewidth=0)
        ax.set_ylabel(name, fontsize=8)
    axes[-1].set_xlabel("age (frames)")
    if title:
        axes[0].set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.paths.get("out_dir", "dataset")
    records = synth.build_dataset(cfg.dataset_config(args.seed), out_dir)
    counts = {}
    for r in records:
        counts[r.split] = counts.get(r.split, 0) + 1
    for split in ("train", "val", "test"):
        print(f"{split}: {counts.get(split, 0)} samples")
    print(f"manifest: {os.path.join(out_dir, 'manifest.tsv')}")
    return 0


def _standardized_pairs(records, base_dir):
    pairs = []
    for rec in records:
        raw = c2mod.load_c2(os.path.join(base_dir, rec.raw_path))
        truth = c2mod.load_c2(os.path.join(base_dir, rec.truth_path))
        raw_std, params = c2mod.standardize(raw)
        target_std = (truth.values - params.mean) / params.std
        pairs.append((raw_std.values, target_std))
    return pairs


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if not os.path.exists(args.manifest):
        raise ConfigError(f"manifest not found: {args.manifest}")
    records = synth.load_manifest(args.manifest)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    train_records = [r for r in records if r.split == "train"]
    if not train_records:
        raise ConfigError("training split is empty")
    pairs = _standardized_pairs(train_records, base_dir)
    seed = args.seed if args.seed is not None else int(cfg.train.get("init_seed", 0))
    model = fcdae.build_model(cfg.architecture(), seed)
    model, history = fcdae.train(model, pairs, cfg.train_config())
    out_dir = args.out or cfg.paths.get("out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "model.fcda")
    fcdae.save_checkpoint(ckpt_path, model)
    history_csv = "epoch,loss\n" + "".join(
        f"{i},{loss!r}\n" for i, loss in enumerate(history))
    _write_text(os.path.join(out_dir, "loss_history.csv"), history_csv)
    print(f"trained {model.epochs_trained} epochs, final loss {model.final_loss:.6g}")
    print(f"checkpoint: {ckpt_path}")
    return 0


def cmd_denoise(args) -> int:
    model = fcdae.load_checkpoint(args.checkpoint)
    raw = c2mod.load_c2(args.input)
    den = fcdae.denoise(model, raw)
    c2mod.save_c2(args.output, den, provenance=f"denoised from {args.input}")
    print(f"wrote {args.output} ({den.n_frames} frames)")
    return 0


def cmd_eval(args) -> int:
    z, max_lag, ssim_threshold = metrics.DEFAULT_Z, metrics.DEFAULT_MAX_LAG, \
        metrics.DEFAULT_SSIM_THRESHOLD
    if args.config:
        z, max_lag, ssim_threshold = load_config(args.config).eval_params()
    if args.z is not None:
        z = args.z
    if args.max_lag is not None:
        max_lag = args.max_lag
    raw = c2mod.load_c2(args.raw)
    den = c2mod.load_c2(args.denoised)
    report = metrics.evaluate_reliability(raw, den, max_lag=max_lag, z=z)
    payload = json.loads(report.to_json())
    payload["ssim_threshold"] = ssim_threshold
    payload["ssim_reliable"] = bool(report.ssim >= ssim_threshold)
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        _write_text(args.out, text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def cmd_fit(args) -> int:
    c2 = c2mod.load_c2(args.input)
    traces = fitdyn.fit_slices(c2, model_kind=args.model,
                               half_window=args.half_window,
                               edge_exclusion_fraction=args.edge_exclude)
    out = args.out or (os.path.splitext(args.input)[0] + "_trace.csv")
    _write_text(out, traces.to_csv())
    print(f"fitted {len(traces.ages)} slices, wrote {out}")
    if args.svg:
        _plot_traces(args.svg, traces, title=f"{args.model} fits: {args.input}")
        print(f"wrote {args.svg}")
    return 0


def _study_scenario(cfg: RunConfig):
    specs = cfg.dynamics_specs()
    for spec in specs:
        if spec.kind == "oscillatory":
            return spec
    return specs[0]


def cmd_bootstrap_study(args) -> int:
    cfg = load_config(args.config)
    model = fcdae.load_checkpoint(args.checkpoint)
    out_dir = args.out or cfg.paths.get("out_dir", "study")
    os.makedirs(out_dir, exist_ok=True)
    fractions = args.fractions or list(DEFAULT_FRACTIONS)
    z, max_lag, _ = cfg.eval_params()

    d = cfg.dataset
    spec = _study_scenario(cfg)
    n_frames = int(d.get("n_frames", 128))
    seed = int(d.get("seed", 0)) + 9000
    speckle = synth.SpeckleSpec(int(d.get("n_pixels", 4000)),
                                int(d.get("n_modes", 2)),
                                d.get("mean_counts_per_pixel", 5.0), seed)
    series, _ = synth.simulate_noisy_c2(spec, speckle, n_frames, seed,
                                        float(d.get("frame_interval_s", 1.0)))
    truth = synth.generate_truth_c2(spec, n_frames,
                                    float(d.get("frame_interval_s", 1.0)),
                                    speckle.beta0)
    model_kind = "composite" if spec.kind == "oscillatory" else "kww"

    tau_star = None
    records = []
    for i, fraction in enumerate(fractions):
        label = "nominal" if fraction >= 1.0 else f"{fraction:g}"
        sub = series if fraction >= 1.0 else \
            c2mod.bootstrap_pixels(series, fraction, seed + 1 + i)
        raw = c2mod.repair_diagonal(c2mod.compute_c2(sub))
        den = fcdae.denoise(model, raw)
        if tau_star is None:
            # fixed once from the nominal denoised map so fractions compare
            tau_star = metrics.tau_star_from_maps(den, raw)
        rel = metrics.evaluate_reliability(raw, den, max_lag=min(max_lag, n_frames - 1),
                                           z=z, tau_star=tau_star)
        fit_raw = fitdyn.fit_g2(c2mod.extract_g2(raw), model_kind)
        fit_den = fitdyn.fit_g2(c2mod.extract_g2(den), model_kind)
        raw_path = os.path.join(out_dir, f"raw_{label}.c2f")
        den_path = os.path.join(out_dir, f"denoised_{label}.c2f")
        plot_path = os.path.join(out_dir, f"g2_{label}.svg")
        c2mod.save_c2(raw_path, raw, provenance=f"bootstrap fraction {fraction}")
        c2mod.save_c2(den_path, den, provenance=f"denoised bootstrap fraction {fraction}")
        g2_raw = c2mod.extract_g2(raw)
        g2_den = c2mod.extract_g2(den)
        g2_truth = c2mod.extract_g2(truth)
        _plot_g2_overlay(plot_path, g2_raw.lags, g2_raw.values, g2_den.values,
                         g2_truth.values, title=f"bootstrap fraction {label}")
        records.append({
            "label": label,
            "fraction": fraction,
            "n_pixels_used": sub.n_pixels,
            "snr_raw": rel.snr_raw,
            "snr_denoised": rel.snr_denoised,
            "beta_obs_raw": rel.beta_obs_raw,
            "beta_obs_denoised": rel.beta_obs_denoised,
            "delta_beta_rel": rel.delta_beta_rel,
            "ssim": rel.ssim,
            "acf_pass": rel.acf_pass,
            "fit_raw": _fit_payload(fit_raw),
            "fit_denoised": _fit_payload(fit_den),
            "raw_path": raw_path,
            "denoised_path": den_path,
            "plot_path": plot_path,
        })

    report = {"scenario": spec.summary(), "tau_star": tau_star,
              "fractions": list(fractions), "records": records}
    _write_json(os.path.join(out_dir, "study.json"), report, args.timestamps)
    csv_lines = ["fraction,n_pixels,snr_raw,snr_denoised,beta_obs_raw,"
                 "beta_obs_denoised,amp_denoised,r2_denoised"]
    for rec in records:
        amp = rec["fit_denoised"]["params"].get("amp", "")
        csv_lines.append(
            f"{rec['fraction']},{rec['n_pixels_used']},{rec['snr_raw']!r},"
            f"{rec['snr_denoised']!r},{rec['beta_obs_raw']!r},"
            f"{rec['beta_obs_denoised']!r},{amp!r},"
            f"{rec['fit_denoised']['r_squared']!r}")
    _write_text(os.path.join(out_dir, "study.csv"), "\n".join(csv_lines) + "\n")
    for rec in records:
        print(f"fraction {rec['label']}: snr_raw={rec['snr_raw']:.3f} "
              f"snr_denoised={rec['snr_denoised']:.3f}")
    print(f"report: {os.path.join(out_dir, 'study.json')}")
    return 0


def _fit_payload(fit: fitdyn.FitResult) -> dict:
    names = fit.param_names
    values = fit.params.as_array()
    return {
        "params": {n: float(v) for n, v in zip(names, values)},
        "sigma1": {n: float(s) for n, s in zip(names, fit.sigma1)},
        "r_squared": fit.r_squared,
        "converged": fit.converged,
        "n_iterations": fit.n_iterations,
    }


def cmd_ensemble(args) -> int:
    cfg = load_config(args.config)
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        base = args.seed if args.seed is not None else 0
        seeds = [base + i for i in range(4)]
    if len(seeds) < 2:
        raise ConfigError(f"need >= 2 models for an ensemble, got {len(seeds)}")
    if not os.path.exists(args.manifest):
        raise ConfigError(f"manifest not found: {args.manifest}")
    records = synth.load_manifest(args.manifest)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    train_records = [r for r in records if r.split == "train"]
    val_records = [r for r in records if r.split == "val"]
    if not train_records:
        raise ConfigError("training split is empty")
    if not val_records:
        raise ConfigError("validation split is empty")
    pairs = _standardized_pairs(train_records, base_dir)
    models = fcdae.train_ensemble(cfg.architecture(), pairs, cfg.train_config(), seeds)
    raw_maps = [c2mod.load_c2(os.path.join(base_dir, r.raw_path)) for r in val_records]
    denoised_per_sample = [[fcdae.denoise(m, raw) for m in models] for raw in raw_maps]
    report = metrics.build_ensemble_report(denoised_per_sample, raw_maps)
    out_dir = args.out or cfg.paths.get("out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    payload = json.loads(report.to_json())
    payload["seeds"] = seeds
    payload["samples"] = [r.sample_id for r in val_records]
    _write_json(os.path.join(out_dir, "ensemble.json"), payload, args.timestamps)
    print(f"ensemble of {len(seeds)} models over {len(val_records)} samples")
    print(f"mean variance {report.mean_variance:.3e}, "
          f"median ratio {report.median_ratio:.3e}")
    print(f"report: {os.path.join(out_dir, 'ensemble.json')}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _fractions_list(text: str):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad fractions list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("fractions list is empty")
    return values


_CONFIG_HELP = """\
configuration file (JSON), four sections with these keys and defaults:
  dataset: seed (0), n_frames (128), frame_interval_s (1.0),
           n_pixels (4000), n_modes (2), mean_counts_per_pixel (5.0 or
           null for no photon noise), dynamics (list of specs, each with
           kind stationary_kww|aging_kww|oscillatory|two_step plus tau_c,
           gamma, aging_exponent, amp, omega, damping, tau_c2, gamma2,
           weight), n_per_dynamics (2), splits ({train:.8,val:.1,test:.1}),
           augment {reverse (true), subsample ([2]), crop_size (64),
           crop_stride (48)}, repair_raw_diagonal (true),
           save_pixel_series (false)
  train:   learning_rate (1e-3), beta1 (0.9), beta2 (0.999),
           batch_size (8), max_epochs (30),
           early_stop_loss_threshold (1e-3), shuffle_seed (0),
           init_seed (0), channels ([1,4,8,16,32]), kernel_size (3)
  eval:    z (1.96), max_lag (20), ssim_threshold (0.15)
  paths:   out_dir
Unknown keys are rejected.  A ready-to-run example ships at
configs/example.json.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="c2denoise",
        description="Denoise two-time correlation maps and quantify the result.",
        epilog=_CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic (raw, truth) dataset")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override dataset seed")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the denoiser on a dataset manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True, help="manifest.tsv from synth")
    p.add_argument("--seed", type=int, default=None, help="override init seed")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise one C2F1 file")
    p.add_argument("checkpoint", help="FCDA checkpoint path")
    p.add_argument("input", help="input .c2f file")
    p.add_argument("output", help="output .c2f file")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="reliability metrics for a raw/denoised pair")
    p.add_argument("raw", help="raw .c2f file")
    p.add_argument("denoised", help="denoised .c2f file")
    p.add_argument("--config", default=None)
    p.add_argument("--z", type=float, default=None, help="ACF confidence factor")
    p.add_argument("--max-lag", type=int, default=None, dest="max_lag")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit", help="per-age-slice dynamics fits")
    p.add_argument("input", help="input .c2f file")
    p.add_argument("--model", choices=("kww", "composite"), default="kww")
    p.add_argument("--half-window", type=int, default=0, dest="half_window")
    p.add_argument("--edge-exclude", type=float, default=0.1, dest="edge_exclude")
    p.add_argument("--out", default=None, help="trace CSV path")
    p.add_argument("--svg", default=None, help="optional SVG of the traces")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap-study",
                       help="controlled degradation study over pixel fractions")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--fractions", type=_fractions_list, default=None,
                   help="comma-separated list, default 1.0,0.5,0.25,0.10,0.05")
    p.add_argument("--timestamps", action="store_true",
                   help="embed a generation timestamp in reports")
    p.set_defaults(func=cmd_bootstrap_study)

    p = sub.add_parser("ensemble", help="seed-ensemble variance study")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--seeds", default=None, help="comma-separated seed list")
    p.add_argument("--seed", type=int, default=None,
                   help="base seed when --seeds is absent")
    p.add_argument("--out", default=None)
    p.add_argument("--timestamps", action="store_true")
    p.set_defaults(func=cmd_ensemble)

    return parser


_ERROR_PREFIX = (
    (ConfigError, "E_CONFIG", 2),
    (FormatError, "E_FORMAT", 3),
    (ShapeError, "E_SHAPE", 4),
    (NumericError, "E_NUMERIC", 5),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except C2DenoiseError as exc:
        for cls, prefix, code in _ERROR_PREFIX:
            if isinstance(exc, cls):
                print(f"{prefix}: {exc}", file=sys.stderr)
                return code
        print(f"E_NUMERIC: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"E_FORMAT: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
