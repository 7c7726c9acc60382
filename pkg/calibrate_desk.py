"""Scratch calibration of the desk-scale dataset/training configuration.

Not part of the package: measures noise fraction, achievable held-out loss,
MSE ratio, contrast shift, and SNR ordering for a candidate config.
"""

import os
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from c2denoise import c2 as c2mod
from c2denoise.fcdae import FcDaeArchitecture, TrainConfig, build_model, train, denoise
from c2denoise.metrics import estimate_beta_obs, contrast_shift, tau_star_from_maps, snr
from c2denoise.synth import DatasetConfig, DynamicsSpec, build_dataset, load_manifest

T0 = time.time()

def log(msg):
    print(f"[{time.time()-T0:7.1f}s] {msg}", flush=True)

DYNAMICS = [
    DynamicsSpec("stationary_kww", tau_c=30.0, gamma=1.0),
    DynamicsSpec("stationary_kww", tau_c=18.0, gamma=0.7),
    DynamicsSpec("oscillatory", tau_c=30.0, gamma=1.0, amp=0.35, omega=0.35,
                 damping=0.015),
    DynamicsSpec("aging_kww", tau_c=10.0, gamma=1.0, aging_exponent=0.45),
    DynamicsSpec("two_step", tau_c=8.0, gamma=1.0, tau_c2=60.0, gamma2=1.0,
                 weight=0.5),
]

config = DatasetConfig(
    dynamics=DYNAMICS,
    n_frames=128,
    n_pixels=6000,
    n_modes=2,
    mean_counts_per_pixel=10.0,
    n_per_dynamics=3,
    splits=(0.8, 0.1, 0.1),
    reverse=True,
    subsample=(2,),
    crop_size=64,
    crop_stride=32,
    seed=20260809,
)

out = "/tmp/desk_cal"
os.makedirs(out, exist_ok=True)
log("building dataset ...")
records = build_dataset(config, out)
log(f"dataset: {len(records)} records "
    f"({sum(r.split=='train' for r in records)} train)")

# noise characterization on val records
def load(rec, which):
    return c2mod.load_c2(os.path.join(out, getattr(rec, which + "_path")))

val = [r for r in records if r.split == "val"]
test = [r for r in records if r.split == "test"]
noise_fracs = []
for rec in val:
    raw = load(rec, "raw").values
    truth = load(rec, "truth").values
    noise_var = np.mean((raw - truth) ** 2)
    sigma2 = raw.var()
    noise_fracs.append(noise_var / sigma2)
    log(f"  {rec.sample_id} [{rec.spec_summary.split(',')[0]}] "
        f"sigma_n={np.sqrt(noise_var):.4f} f={noise_var/sigma2:.4f} "
        f"beta_raw={estimate_beta_obs(c2mod.C2Matrix(raw)):.3f} "
        f"beta_truth={estimate_beta_obs(c2mod.C2Matrix(truth)):.3f}")
log(f"noise fraction f: median {np.median(noise_fracs):.4f}")

# training
train_records = [r for r in records if r.split == "train"]
pairs = []
for rec in train_records:
    raw = load(rec, "raw")
    truth = load(rec, "truth")
    raw_std, params = c2mod.standardize(raw)
    pairs.append((raw_std.values, (truth.values - params.mean) / params.std))

tc = TrainConfig(learning_rate=1e-3, batch_size=8, max_epochs=30,
                 early_stop_loss_threshold=5e-4, shuffle_seed=7)
model = build_model(FcDaeArchitecture(), seed=11)
log("training ...")
model, hist = train(model, pairs, tc)
log(f"trained {len(hist)} epochs: loss {hist[0]:.4f} -> {hist[-1]:.4f}")
for i, h in enumerate(hist):
    if i % 5 == 0 or i == len(hist) - 1:
        log(f"  epoch {i}: {h:.5f}")

# held-out evaluation
for name, recs in (("val", val), ("test", test)):
    mr, md = [], []
    deltas, snr_ok = [], []
    for rec in recs:
        raw = load(rec, "raw")
        truth = load(rec, "truth")
        den = denoise(model, raw)
        mr.append(np.mean((raw.values - truth.values) ** 2))
        md.append(np.mean((den.values - truth.values) ** 2))
        b_raw = estimate_beta_obs(raw)
        b_den = estimate_beta_obs(den)
        if b_raw > 0.1:
            deltas.append(contrast_shift(b_raw, b_den))
        ts = tau_star_from_maps(den, raw)
        snr_ok.append(snr(den.values if False else den, ts) >= snr(raw, ts))
    ratio = np.mean(md) / np.mean(mr)
    log(f"{name}: MSE ratio mean(d)/mean(r) = {ratio:.3f}  "
        f"per-sample ratios: {[f'{d/r:.2f}' for d, r in zip(md, mr)]}")
    log(f"{name}: delta_beta = {[f'{d:+.3f}' for d in deltas]}")
    log(f"{name}: snr_den>=snr_raw: {snr_ok}")
log("done")
