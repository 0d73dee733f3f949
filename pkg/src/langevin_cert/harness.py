"""Empirical decay rates, measure-tail checks and report aggregation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .certificate import friction_constant
from .dynamics import Autocorrelation
from .errors import StatisticsError
from .gamma import as_points

TAIL_DENOMINATOR = 10.0 * math.exp(4.0) + 1.0
MU_KC_BOUND = 1.0 / TAIL_DENOMINATOR
MU2_ENERGY_BOUND = 1.0 / (2.0 * TAIL_DENOMINATOR)


@dataclass
class RateEstimate:
    observable: str
    rate: float
    t_lo: float
    t_hi: float
    stderr: float
    r_squared: float
    n_points: int

    def __post_init__(self):
        if not self.t_lo < self.t_hi:
            raise StatisticsError(f"empty fit window [{self.t_lo}, {self.t_hi}]")
        if not math.isfinite(self.rate):
            raise StatisticsError("fitted rate is not finite")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class WindowPolicy:
    """Fit window: ``C > snr * stderr`` and ``t_min <= t <= t_max``.

    ``t_min = None`` means ``1 / gamma`` when a friction is supplied, else 0.
    The window is the longest run of consecutive lags meeting the criteria,
    starting at the first admissible lag.
    """

    snr: float = 5.0
    t_min: float | None = None
    t_max: float | None = None


def estimate_decay_rate(acf, policy=WindowPolicy(), gamma=None, observable="f"):
    """Weighted least squares of ``log C`` against ``t`` over the window."""
    t = np.asarray(acf.t, dtype=float)
    C = np.asarray(acf.C, dtype=float)
    se = np.asarray(acf.stderr, dtype=float)
    t_min = policy.t_min if policy.t_min is not None else (1.0 / gamma if gamma else 0.0)
    t_max = policy.t_max if policy.t_max is not None else np.inf
    ok = (C > policy.snr * se) & (C > 0) & (t >= t_min - 1e-12) & (t <= t_max + 1e-12)
    start = np.flatnonzero(ok & (t >= t_min - 1e-12))
    if start.size == 0:
        raise StatisticsError("no lag satisfies the fit-window criteria")
    i0 = int(start[0])
    i1 = i0
    while i1 + 1 < len(t) and ok[i1 + 1]:
        i1 += 1
    if i1 - i0 + 1 < 2:
        raise StatisticsError("fit window holds fewer than two lags")
    tw, y = t[i0:i1 + 1], np.log(C[i0:i1 + 1])
    sw = se[i0:i1 + 1] / C[i0:i1 + 1]
    if np.all(sw > 0):
        w = 1.0 / sw ** 2
    else:
        w = np.ones_like(tw)
    X = np.stack([np.ones_like(tw), tw], axis=1)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    resid = y - X @ beta
    ss_res = float(np.sum(w * resid ** 2))
    ybar = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if np.all(sw > 0):
        slope_se = math.sqrt(cov[1, 1])
    else:
        dof = max(1, len(tw) - 2)
        slope_se = math.sqrt(cov[1, 1] * ss_res / dof)
    return RateEstimate(observable, float(-beta[1]), float(tw[0]), float(tw[-1]),
                        float(slope_se), float(r2), int(len(tw)))


def compare_certificate(sigma, rate, n_sigma=3.0):
    """PASS iff ``rate + n_sigma * stderr >= sigma / 2``.

    With ``W >= 1`` the squared weighted norm decays like ``e^{-sigma t}``, so
    an autocovariance amplitude may decay no slower than ``sigma / 2``.
    """
    sigma = float(getattr(sigma, "sigma", sigma))
    threshold = 0.5 * sigma
    passed = rate.rate + n_sigma * rate.stderr >= threshold
    return {"verdict": "PASS" if passed else "FAIL", "passed": bool(passed),
            "rate": rate.rate, "stderr": rate.stderr, "sigma": sigma,
            "threshold": threshold, "margin": rate.rate - threshold,
            "rule": f"rate + {n_sigma:g} stderr >= sigma / 2"}


# ---------------------------------------------------------------------------
# weighted norm
# ---------------------------------------------------------------------------

def weighted_h1_norm(f, zeta_sq, gamma, samples, model, weight=None, n_batches=20):
    """Monte Carlo ``int f^2 W dmu + int zeta^{-2} (|Yf|^2 + |Zf|^2) dmu``.

    ``weight`` is a callable of phase rows (e.g. ``LyapunovWeight.W``) or
    ``None`` for ``W = 1``.  Returns ``(estimate, stderr)`` with batch-mean
    errors over the sample order.
    """
    Z, _ = as_points(model, samples)
    if len(Z) < 2 * n_batches:
        raise StatisticsError(f"need at least {2 * n_batches} samples, got {len(Z)}")
    d = model.dim
    vals = f(Z)
    W = np.ones(len(Z)) if weight is None else np.asarray(weight(Z), dtype=float)
    grad = f.gradient(Z)
    gx, gv = grad[:, :d], grad[:, d:]
    zf = gx - friction_constant(gamma) * gv
    terms = vals ** 2 * W + (np.sum(gv ** 2, axis=1) + np.sum(zf ** 2, axis=1)) / zeta_sq
    batches = np.array([b.mean() for b in np.array_split(terms, n_batches)])
    return float(terms.mean()), float(batches.std(ddof=1) / math.sqrt(n_batches))


# ---------------------------------------------------------------------------
# measure tails
# ---------------------------------------------------------------------------

def _mean_se(values, n_batches=20):
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2 * n_batches:
        raise StatisticsError(f"need at least {2 * n_batches} samples, got {n}")
    batches = np.array([b.mean() for b in np.array_split(values, n_batches)])
    se = batches.std(ddof=1) / math.sqrt(n_batches)
    p = values.mean()
    if set(np.unique(values)) <= {0.0, 1.0}:
        se = max(se, math.sqrt(p * (1 - p) / n))
    return float(p), float(se)


def gradient_moment_bound(kappa2, T, d):
    """``kappa'' T sqrt(d) / (1 - 1/(16 sqrt d))``."""
    return kappa2 * T * math.sqrt(d) / (1.0 - 1.0 / (16.0 * math.sqrt(d)))


def mu_tail_checks(model, mp, cert, phase_samples, position_samples=None,
                   sampler_info=None, n_sigma=3.0):
    """Estimate the three tail quantities and compare with their bounds.

    Each check passes iff ``estimate - n_sigma * stderr <= bound``.  If the
    sampler reports an acceptance rate outside ``(0.05, 0.95)`` the verdict
    is ``INCONCLUSIVE``.
    """
    from scipy.stats import chi2

    Z, _ = as_points(model, phase_samples)
    d = model.dim
    xs = Z[:, :d] if position_samples is None else np.asarray(position_samples, dtype=float)
    grad2 = np.sum(model.gradient(xs) ** 2, axis=1)
    U = model.value(xs)
    kappa2 = cert.growth["kappa2"]
    in_K = (np.sum(Z[:, d:] ** 2, axis=1) <= cert.velocity_cap) & (model.value(Z[:, :d]) <= cert.R2)
    checks = {}
    for name, values, bound in (
        ("grad_moment", grad2, gradient_moment_bound(kappa2, mp.T, d)),
        ("mu2_U_above_R2", (U >= cert.R2).astype(float), MU2_ENERGY_BOUND),
        ("mu_K_complement", (~in_K).astype(float), MU_KC_BOUND),
    ):
        est, se = _mean_se(values)
        checks[name] = {"estimate": est, "stderr": se, "bound": bound,
                        "passed": bool(est - n_sigma * se <= bound)}
    checks["mu_K_complement"]["exact_velocity_tail"] = float(chi2.sf(cert.velocity_cap / mp.T, d))
    verdict = "PASS" if all(c["passed"] for c in checks.values()) else "FAIL"
    if sampler_info is not None:
        acc = sampler_info.get("acceptance")
        if acc is not None and not 0.05 < acc < 0.95:
            verdict = "INCONCLUSIVE"
    mu_K = 1.0 - checks["mu_K_complement"]["estimate"]
    return {"checks": checks, "verdict": verdict, "passed": verdict == "PASS",
            "mu_estimates": {"mu_K": mu_K, "mu_Kc": checks["mu_K_complement"]["estimate"],
                             "stderr": checks["mu_K_complement"]["stderr"]}}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps_report(report):
    """Canonical JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_plain(report), sort_keys=True, indent=2)


def aggregate(sections):
    """Combine named section results into one report with an overall status."""
    status = {}
    for name, sec in sections.items():
        passed = sec.get("passed") if isinstance(sec, dict) else None
        status[name] = "PASS" if passed else ("FAIL" if passed is False else "INFO")
    overall = "FAIL" if "FAIL" in status.values() else "PASS"
    return {"overall": overall, "passed": overall == "PASS", "status": status,
            "sections": sections}


def autocorrelation_from_rows(rows):
    """Rebuild an :class:`Autocorrelation` from ``(t, C, stderr)`` rows."""
    arr = np.asarray(rows, dtype=float)
    return Autocorrelation(arr[:, 0], arr[:, 1], arr[:, 2], 0)
