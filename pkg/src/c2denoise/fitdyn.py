"""Nonlinear least-squares fitting of g2 curves.

Two model families: the stretched-exponential (KWW) decay under the
Siegert relation, ``c_inf + beta * exp(-2 (tau/tau_c)**gamma)``, and a
composite of that plus a damped cosine for oscillatory dynamics.  Fits use
a Levenberg-Marquardt loop on damped normal equations with a forward
difference Jacobian; 1-sigma uncertainties come from the residual-variance
scaled inverse Gauss-Newton Hessian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .c2 import C2Matrix, G2Curve, slice_age
from .errors import NumericError, ShapeError
from typing import Optional

__all__ = [
    "KwwParams",
    "CompositeParams",
    "FitResult",
    "SliceTraces",
    "kww_model",
    "composite_model",
    "fit_g2",
    "fit_slices",
    "KWW_PARAM_NAMES",
    "COMPOSITE_PARAM_NAMES",
]

KWW_PARAM_NAMES = ("c_inf", "beta", "tau_c", "gamma")
COMPOSITE_PARAM_NAMES = KWW_PARAM_NAMES + ("amp", "damp", "omega", "phase")


@dataclass(frozen=True)
class KwwParams:
    """Baseline, contrast, relaxation time (frames) and stretching exponent."""

    c_inf: float
    beta: float
    tau_c: float
    gamma: float

    def __post_init__(self):
        if self.tau_c <= 0:
            raise ValueError("tau_c must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0.0 < self.gamma <= 2.0:
            raise ValueError("gamma must lie in (0, 2]")

    def as_array(self):
        return np.array([self.c_inf, self.beta, self.tau_c, self.gamma])


@dataclass(frozen=True)
class CompositeParams:
    """KWW parameters plus a damped sinusoid (amplitude, decay, frequency, phase)."""

    c_inf: float
    beta: float
    tau_c: float
    gamma: float
    amp: float
    damp: float
    omega: float
    phase: float

    def __post_init__(self):
        if self.tau_c <= 0:
            raise ValueError("tau_c must be positive")
        if self.damp < 0:
            raise ValueError("damp must be >= 0")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")

    def as_array(self):
        return np.array([self.c_inf, self.beta, self.tau_c, self.gamma,
                         self.amp, self.damp, self.omega, self.phase])


@dataclass
class FitResult:
    """Fitted parameters with covariance, 1-sigma errors and goodness of fit."""

    params: object
    covariance: np.ndarray
    sigma1: np.ndarray
    r_squared: float
    converged: bool
    n_iterations: int
    model_kind: str = "kww"

    @property
    def param_names(self):
        return COMPOSITE_PARAM_NAMES if self.model_kind == "composite" else KWW_PARAM_NAMES


def kww_model(tau, p: KwwParams):
    """``c_inf + beta * exp(-2 (tau/tau_c)**gamma)``; exact at tau = 0."""
    tau = np.asarray(tau, dtype=np.float64)
    out = p.c_inf + p.beta * np.exp(-2.0 * (tau / p.tau_c) ** p.gamma)
    return float(out) if out.ndim == 0 else out


def composite_model(tau, p: CompositeParams):
    """KWW plus ``amp * exp(-damp*tau) * cos(omega*tau + phase)``."""
    tau = np.asarray(tau, dtype=np.float64)
    kww = p.c_inf + p.beta * np.exp(-2.0 * (tau / p.tau_c) ** p.gamma)
    out = kww + p.amp * np.exp(-p.damp * tau) * np.cos(p.omega * tau + p.phase)
    return float(out) if out.ndim == 0 else out


def _eval_vector(kind: str, tau: np.ndarray, vec: np.ndarray) -> np.ndarray:
    c_inf, beta, tau_c, gamma = vec[:4]
    tau_c = max(tau_c, 1e-12)
    decay = np.exp(-2.0 * (tau / tau_c) ** gamma)
    out = c_inf + beta * decay
    if kind == "composite":
        amp, damp, omega, phase = vec[4:]
        out = out + amp * np.exp(-damp * tau) * np.cos(omega * tau + phase)
    return out


def _default_bounds(kind: str):
    lo = np.array([-np.inf, 0.0, 1e-6, 0.05])
    hi = np.array([np.inf, np.inf, np.inf, 2.0])
    if kind == "composite":
        lo = np.concatenate([lo, [-np.inf, 0.0, 0.0, -2.0 * np.pi]])
        hi = np.concatenate([hi, [np.inf, np.inf, np.pi, 2.0 * np.pi]])
    return lo, hi


def _initial_guess(kind: str, tau: np.ndarray, y: np.ndarray) -> np.ndarray:
    n_tail = max(1, len(y) // 10)
    c_inf = float(np.mean(y[-n_tail:]))
    beta = max(float(y[0] - c_inf), 1e-6)
    # first lag where the decaying part falls below 1/e of its start
    target = c_inf + beta / math.e
    below = np.flatnonzero(y <= target)
    if below.size:
        tau_c = max(float(tau[below[0]]), 1.0)
    else:
        tau_c = max(float(tau[-1]) / 4.0, 1.0)
    vec = [c_inf, beta, tau_c, 1.0]
    if kind == "composite":
        vec = list(_composite_start(tau, y, np.array(vec)))
    return np.array(vec, dtype=np.float64)


def _composite_start(tau, y, kww_start):
    """Seed the composite fit: inner KWW fit, then a linear sinusoid solve.

    Given a candidate frequency (residual FFT peak) and a small damping
    grid, ``A cos + B sin`` enters the residual linearly; the best
    (amp, phase) pair follows from least squares.
    """
    curve = G2Curve(tau.astype(np.int64), y)
    try:
        inner = fit_g2(curve, "kww", exclude_lag0=False)
        kww_vec = inner.params.as_array()
    except (NumericError, np.linalg.LinAlgError):
        kww_vec = kww_start
    resid = y - _eval_vector("kww", tau, kww_vec)
    centered = resid - resid.mean()
    spectrum = np.abs(np.fft.rfft(centered))
    if spectrum.size > 1:
        k = 1 + int(np.argmax(spectrum[1:]))
        omega = min(2.0 * math.pi * k / (tau[-1] - tau[0] + 1.0), math.pi)
    else:
        omega = 0.1
    span = max(float(tau[-1]), 1.0)
    best = None
    for damp in (0.0, 1.0 / span, 4.0 / span):
        envelope = np.exp(-damp * tau)
        design = np.column_stack([envelope * np.cos(omega * tau),
                                  envelope * np.sin(omega * tau)])
        coef, _, _, _ = np.linalg.lstsq(design, resid, rcond=None)
        sse = float(np.sum((resid - design @ coef) ** 2))
        if best is None or sse < best[0]:
            amp = float(np.hypot(coef[0], coef[1]))
            phase = float(math.atan2(-coef[1], coef[0]))
            best = (sse, amp, damp, phase)
    _, amp, damp, phase = best
    return [kww_vec[0], max(kww_vec[1], 1e-6), kww_vec[2], kww_vec[3],
            amp, damp, omega, phase]


def _jacobian(kind, tau, vec):
    base = _eval_vector(kind, tau, vec)
    jac = np.empty((len(tau), len(vec)))
    for j in range(len(vec)):
        step = 1e-7 * (1.0 + abs(vec[j]))
        bumped = vec.copy()
        bumped[j] += step
        jac[:, j] = (_eval_vector(kind, tau, bumped) - base) / step
    return jac, base


def _to_params(kind: str, vec: np.ndarray):
    if kind == "composite":
        return CompositeParams(*[float(v) for v in vec])
    return KwwParams(*[float(v) for v in vec])


def fit_g2(curve: G2Curve, model_kind: str = "kww",
           init: Optional[np.ndarray] = None, bounds=None,
           exclude_lag0: bool = True) -> FitResult:
    """Levenberg-Marquardt fit of a g2 curve.

    The self-correlation lag tau = 0 is excluded by default (it carries the
    repaired diagonal, not dynamics).  Box bounds are enforced by
    projection.  Raises NumericError when fewer than n_params + 1 points
    remain.
    """
    if model_kind not in ("kww", "composite"):
        raise ValueError(f"unknown model kind {model_kind!r}")
    mask = curve.lags > 0 if exclude_lag0 else np.ones(len(curve.lags), bool)
    tau = curve.lags[mask].astype(np.float64)
    y = curve.values[mask]
    n_params = 8 if model_kind == "composite" else 4
    if len(tau) < n_params + 1:
        raise NumericError(
            f"need at least {n_params + 1} points to fit, got {len(tau)}")
    lo, hi = _default_bounds(model_kind) if bounds is None else bounds
    vec = _initial_guess(model_kind, tau, y) if init is None else \
        np.asarray(init, dtype=np.float64).copy()
    vec = np.clip(vec, lo, hi)

    def cost_of(v):
        r = _eval_vector(model_kind, tau, v) - y
        return float(r @ r)

    def projected(g, v):
        # at an active box bound the inward-pointing gradient is admissible
        g = g.copy()
        g[(v <= lo) & (g > 0)] = 0.0
        g[(v >= hi) & (g < 0)] = 0.0
        return g

    cost = cost_of(vec)
    lam = 1e-3
    converged = False
    n_iter = 0
    stagnant = 0
    for n_iter in range(1, 201):
        jac, fitted = _jacobian(model_kind, tau, vec)
        resid = fitted - y
        grad = 2.0 * jac.T @ resid
        # first-order optimality: stop only once the gradient is small too
        if np.max(np.abs(projected(grad, vec))) <= 1e-8 * (1.0 + cost):
            converged = True
            break
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1e-12
        accepted = False
        for _ in range(40):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -0.5 * grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = np.clip(vec + step, lo, hi)
            trial_cost = cost_of(trial)
            if trial_cost < cost:
                rel_decrease = (cost - trial_cost) / max(cost, 1e-300)
                step_norm = float(np.linalg.norm(trial - vec))
                vec = trial
                cost = trial_cost
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                if rel_decrease < 1e-10 or step_norm < 1e-12:
                    stagnant += 1
                else:
                    stagnant = 0
                break
            lam *= 10.0
            if lam > 1e12:
                break
        if not accepted:
            # damping cap: optimum as good as reachable from here
            converged = bool(
                np.max(np.abs(projected(grad, vec))) <= 1e-6 * (1.0 + cost))
            break
        if stagnant >= 3:
            converged = True
            break

    jac, fitted = _jacobian(model_kind, tau, vec)
    resid = fitted - y
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_res <= 1e-20:
        r_squared = 1.0
    elif ss_tot <= 1e-20:
        r_squared = 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    dof = max(len(tau) - n_params, 1)
    jtj = jac.T @ jac
    try:
        cov = (ss_res / dof) * np.linalg.inv(jtj + 1e-300 * np.eye(n_params))
        sigma1 = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        cov = np.full((n_params, n_params), np.nan)
        sigma1 = np.full(n_params, np.nan)
        converged = False
    return FitResult(_to_params(model_kind, vec), cov, sigma1, r_squared,
                     converged, n_iter, model_kind)


@dataclass
class SliceTraces:
    """Per-age fit results over the central band of a map."""

    ages: np.ndarray
    results: list
    model_kind: str

    @property
    def param_names(self):
        return COMPOSITE_PARAM_NAMES if self.model_kind == "composite" else KWW_PARAM_NAMES

    def param_trace(self, name: str) -> np.ndarray:
        i = self.param_names.index(name)
        return np.array([r.params.as_array()[i] for r in self.results])

    def sigma_trace(self, name: str) -> np.ndarray:
        i = self.param_names.index(name)
        return np.array([r.sigma1[i] for r in self.results])

    def r_squared_trace(self) -> np.ndarray:
        return np.array([r.r_squared for r in self.results])

    def converged_mask(self) -> np.ndarray:
        return np.array([r.converged for r in self.results], dtype=bool)

    def to_csv(self) -> str:
        names = list(self.param_names)
        header = ["age_index"] + names + [f"sigma_{n}" for n in names] \
            + ["r_squared", "converged"]
        lines = [",".join(header)]
        for age, res in zip(self.ages, self.results):
            vals = [str(int(age))]
            vals += [f"{v!r}" for v in res.params.as_array()]
            vals += [f"{v!r}" for v in res.sigma1]
            vals += [f"{res.r_squared!r}", str(int(res.converged))]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def fit_slices(c2: C2Matrix, model_kind: str = "kww", half_window: int = 0,
               edge_exclusion_fraction: float = 0.1) -> SliceTraces:
    """Fit every age slice in the central band of the map.

    The outer ``edge_exclusion_fraction`` of ages on each side is skipped
    (too few lags there), as is any slice left with fewer than
    n_params + 1 usable lags.
    """
    t = c2.n_frames
    if t < 16:
        raise ShapeError("fit_slices needs at least 16 frames")
    n_excl = max(int(edge_exclusion_fraction * t), half_window)
    n_params = 8 if model_kind == "composite" else 4
    ages = []
    results = []
    for a in range(n_excl, t - n_excl):
        curve = slice_age(c2, a, half_window)
        if np.count_nonzero(curve.lags > 0) < n_params + 1:
            continue
        ages.append(a)
        results.append(fit_g2(curve, model_kind))
    if not ages:
        raise NumericError("no fittable age slices in the central band")
    return SliceTraces(np.array(ages), results, model_kind)
