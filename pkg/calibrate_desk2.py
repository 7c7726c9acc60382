"""Second calibration sweep: lr/batch and smoother dynamics at moderate noise."""

import os
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from c2denoise import c2 as c2mod
from c2denoise.fcdae import FcDaeArchitecture, TrainConfig, build_model, train, denoise
from c2denoise.metrics import estimate_beta_obs, contrast_shift, tau_star_from_maps, snr
from c2denoise.synth import DatasetConfig, DynamicsSpec, build_dataset

T0 = time.time()

def log(msg):
    print(f"[{time.time()-T0:7.1f}s] {msg}", flush=True)

DYNAMICS = [
    DynamicsSpec("stationary_kww", tau_c=35.0, gamma=1.0),
    DynamicsSpec("stationary_kww", tau_c=22.0, gamma=0.8),
    DynamicsSpec("oscillatory", tau_c=30.0, gamma=1.0, amp=0.35, omega=0.35,
                 damping=0.015),
    DynamicsSpec("aging_kww", tau_c=18.0, gamma=1.0, aging_exponent=0.35),
    DynamicsSpec("two_step", tau_c=18.0, gamma=1.0, tau_c2=70.0, gamma2=1.0,
                 weight=0.5),
]

config = DatasetConfig(
    dynamics=DYNAMICS,
    n_frames=128,
    n_pixels=3000,
    n_modes=2,
    mean_counts_per_pixel=8.0,
    n_per_dynamics=3,
    splits=(0.8, 0.1, 0.1),
    reverse=True,
    subsample=(2,),
    crop_size=64,
    crop_stride=32,
    seed=20260809,
)

out = "/tmp/desk_cal2"
os.makedirs(out, exist_ok=True)
log("building dataset ...")
records = build_dataset(config, out)

def load(rec, which):
    return c2mod.load_c2(os.path.join(out, getattr(rec, which + "_path")))

val = [r for r in records if r.split == "val"]
fracs = []
for rec in val:
    raw = load(rec, "raw").values
    truth = load(rec, "truth").values
    fracs.append(np.mean((raw - truth) ** 2) / raw.var())
log(f"{len(records)} records; val noise fraction f: median {np.median(fracs):.4f} "
    f"range [{min(fracs):.4f}, {max(fracs):.4f}]")

train_records = [r for r in records if r.split == "train"]
pairs = []
for rec in train_records:
    raw = load(rec, "raw")
    truth = load(rec, "truth")
    raw_std, p = c2mod.standardize(raw)
    pairs.append((raw_std.values, (truth.values - p.mean) / p.std))

def evaluate(model, recs, label):
    mr, md, deltas, snr_ok = [], [], [], []
    for rec in recs:
        raw = load(rec, "raw")
        truth = load(rec, "truth")
        den = denoise(model, raw)
        mr.append(np.mean((raw.values - truth.values) ** 2))
        md.append(np.mean((den.values - truth.values) ** 2))
        b_raw = estimate_beta_obs(raw)
        if b_raw > 0.1:
            deltas.append(contrast_shift(b_raw, estimate_beta_obs(den)))
        ts = tau_star_from_maps(den, raw)
        snr_ok.append(bool(snr(den, ts) >= snr(raw, ts)))
    log(f"  {label}: MSE ratio {np.mean(md)/np.mean(mr):.3f} "
        f"worst sample ratio {max(d/r for d, r in zip(md, mr)):.2f} "
        f"max|dbeta| {max(abs(d) for d in deltas):.3f} "
        f"snr ok {sum(snr_ok)}/{len(snr_ok)}")

for lr, batch in ((1e-3, 8), (3e-3, 8), (3e-3, 4)):
    tc = TrainConfig(learning_rate=lr, batch_size=batch, max_epochs=30,
                     early_stop_loss_threshold=5e-4, shuffle_seed=7)
    model = build_model(FcDaeArchitecture(), seed=11)
    log(f"training lr={lr} batch={batch} ...")
    model, hist = train(model, pairs, tc)
    log(f"  loss {hist[0]:.4f} -> {hist[-1]:.4f} in {len(hist)} epochs "
        f"(e10 {hist[min(9, len(hist)-1)]:.4f}, e20 {hist[min(19, len(hist)-1)]:.4f})")
    evaluate(model, val, "val")
log("done")
