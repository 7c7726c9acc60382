"""Session fixtures: the desk-scale dataset + trained model shared by the
acceptance suite, and a small seed ensemble."""

import json
import os
import time
from dataclasses import dataclass

import numpy as np
import pytest

from c2denoise import c2 as c2mod
from c2denoise.fcdae import (FcDaeArchitecture, TrainConfig, build_model,
                             save_checkpoint, train, train_ensemble, denoise)
from c2denoise.synth import DatasetConfig, DynamicsSpec, build_dataset

# Desk-scale scenario: dynamics smooth enough for the small network to fit
# within the 30-epoch budget, noise strong enough that denoising pays.
DESK_DYNAMICS = [
    {"kind": "stationary_kww", "tau_c": 35.0, "gamma": 1.0},
    {"kind": "stationary_kww", "tau_c": 22.0, "gamma": 0.8},
    {"kind": "oscillatory", "tau_c": 30.0, "gamma": 1.0, "amp": 0.35,
     "omega": 0.35, "damping": 0.015},
    {"kind": "aging_kww", "tau_c": 18.0, "gamma": 1.0, "aging_exponent": 0.35},
    {"kind": "two_step", "tau_c": 18.0, "gamma": 1.0, "tau_c2": 70.0,
     "gamma2": 1.0, "weight": 0.5},
]

DESK_DATASET = dict(
    seed=20260809,
    n_frames=128,
    frame_interval_s=1.0,
    n_pixels=3000,
    n_modes=2,
    mean_counts_per_pixel=8.0,
    n_per_dynamics=3,
    splits={"train": 0.8, "val": 0.1, "test": 0.1},
    augment={"reverse": True, "subsample": [2], "crop_size": 64,
             "crop_stride": 32},
)

DESK_TRAIN = dict(
    learning_rate=3e-3,
    beta1=0.9,
    beta2=0.999,
    batch_size=4,
    max_epochs=30,
    early_stop_loss_threshold=1e-3,
    shuffle_seed=7,
    init_seed=11,
    channels=[1, 4, 8, 16, 32],
    kernel_size=3,
)

DESK_EVAL = dict(z=1.96, max_lag=20, ssim_threshold=0.15)


@dataclass
class DeskRun:
    dataset_dir: str
    config_path: str
    records: list
    model: object
    checkpoint_path: str
    loss_history: list
    train_seconds: float
    held_out: list  # dicts: record, raw, truth, denoised (val + test splits)

    def split(self, name):
        return [h for h in self.held_out if h["record"].split == name]


def _dataset_config():
    d = DESK_DATASET
    aug = d["augment"]
    return DatasetConfig(
        dynamics=[DynamicsSpec(**spec) for spec in DESK_DYNAMICS],
        n_frames=d["n_frames"],
        frame_interval_s=d["frame_interval_s"],
        n_pixels=d["n_pixels"],
        n_modes=d["n_modes"],
        mean_counts_per_pixel=d["mean_counts_per_pixel"],
        n_per_dynamics=d["n_per_dynamics"],
        splits=(d["splits"]["train"], d["splits"]["val"], d["splits"]["test"]),
        reverse=aug["reverse"],
        subsample=tuple(aug["subsample"]),
        crop_size=aug["crop_size"],
        crop_stride=aug["crop_stride"],
        seed=d["seed"],
    )


@pytest.fixture(scope="session")
def desk(tmp_path_factory) -> DeskRun:
    base = tmp_path_factory.mktemp("desk")
    dataset_dir = str(base / "dataset")
    records = build_dataset(_dataset_config(), dataset_dir)

    config_path = str(base / "config.json")
    with open(config_path, "w") as fh:
        json.dump({"dataset": {**DESK_DATASET, "dynamics": DESK_DYNAMICS},
                   "train": DESK_TRAIN, "eval": DESK_EVAL,
                   "paths": {"out_dir": str(base / "out")}}, fh, indent=1)

    pairs = []
    for rec in records:
        if rec.split != "train":
            continue
        raw = c2mod.load_c2(os.path.join(dataset_dir, rec.raw_path))
        truth = c2mod.load_c2(os.path.join(dataset_dir, rec.truth_path))
        raw_std, params = c2mod.standardize(raw)
        pairs.append((raw_std.values, (truth.values - params.mean) / params.std))

    arch = FcDaeArchitecture(tuple(DESK_TRAIN["channels"]),
                             DESK_TRAIN["kernel_size"])
    config = TrainConfig(
        learning_rate=DESK_TRAIN["learning_rate"],
        beta1=DESK_TRAIN["beta1"],
        beta2=DESK_TRAIN["beta2"],
        batch_size=DESK_TRAIN["batch_size"],
        max_epochs=DESK_TRAIN["max_epochs"],
        early_stop_loss_threshold=DESK_TRAIN["early_stop_loss_threshold"],
        shuffle_seed=DESK_TRAIN["shuffle_seed"],
    )
    model = build_model(arch, DESK_TRAIN["init_seed"])
    t0 = time.time()
    model, history = train(model, pairs, config)
    train_seconds = time.time() - t0

    checkpoint_path = str(base / "model.fcda")
    save_checkpoint(checkpoint_path, model)

    held_out = []
    for rec in records:
        if rec.split == "train":
            continue
        raw = c2mod.load_c2(os.path.join(dataset_dir, rec.raw_path))
        truth = c2mod.load_c2(os.path.join(dataset_dir, rec.truth_path))
        held_out.append({"record": rec, "raw": raw, "truth": truth,
                         "denoised": denoise(model, raw)})

    return DeskRun(dataset_dir, config_path, records, model, checkpoint_path,
                   history, train_seconds, held_out)


@pytest.fixture(scope="session")
def ensemble_models(desk):
    """Four short-trained models with distinct seeds on a training subset."""
    pairs = []
    for rec in desk.records:
        if rec.split != "train":
            continue
        raw = c2mod.load_c2(os.path.join(desk.dataset_dir, rec.raw_path))
        truth = c2mod.load_c2(os.path.join(desk.dataset_dir, rec.truth_path))
        raw_std, params = c2mod.standardize(raw)
        pairs.append((raw_std.values, (truth.values - params.mean) / params.std))
        if len(pairs) >= 32:
            break
    config = TrainConfig(
        learning_rate=DESK_TRAIN["learning_rate"],
        batch_size=4,
        max_epochs=8,
        early_stop_loss_threshold=1e-3,
        shuffle_seed=3,
    )
    arch = FcDaeArchitecture(tuple(DESK_TRAIN["channels"]),
                             DESK_TRAIN["kernel_size"])
    return train_ensemble(arch, pairs, config, seeds=(101, 102, 103, 104))
