"""The Lyapunov weight ``V = exp(b H + psi)`` and pointwise checks of its drift.

All evaluations take batches of phase points ``z = (x, v)`` of shape
``(n, 2d)`` (a single row is accepted) and work in the log domain, since
``b H`` reaches the hundreds on the stress grids.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .certificate import ModelParams
from .errors import NumericsError
from .gamma import DEFAULT_STENCIL, R_term, ScalarField, Y_op, apply_Lstar, as_points

E1 = math.e


def smooth_step(t):
    """``s(t) = phi(t) / (phi(t) + phi(1 - t))`` with ``phi(t) = exp(-1/t)``."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    # s = logistic(1/(1-t) - 1/t); 1/t overflows to inf for subnormal t, which tanh absorbs
    with np.errstate(over="ignore"):
        out[inside] = 0.5 * (1.0 + np.tanh(0.5 * (1.0 / (1.0 - ti) - 1.0 / ti)))
    return out


def smooth_step_prime(t):
    """``s'(t) = s (1 - s) (1/t^2 + 1/(1-t)^2)``, zero outside ``(0, 1)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    s = smooth_step(ti)
    out[inside] = s * (1.0 - s) * (1.0 / ti ** 2 + 1.0 / (1.0 - ti) ** 2)
    return out


class LyapunovWeight:
    """``V = exp(H / R2 + psi)`` and ``W = e V + lambda`` for a certificate.

    ``psi = -delta b h(U) (v . grad U) / |grad U|^2`` on ``{U >= R1}`` and zero
    elsewhere, with ``delta = 3 gamma T d / 2`` and ``b = 1 / R2``.
    """

    def __init__(self, model, cert):
        if model.dim != cert.d:
            raise ValueError(f"model dimension {model.dim} != certificate d = {cert.d}")
        self.model = model
        self.cert = cert
        self.gamma = cert.gamma
        self.T = cert.T
        self.d = cert.d
        self.R1 = cert.R1
        self.R2 = cert.R2
        self.b = 1.0 / cert.R2
        self.delta = 1.5 * cert.gamma * cert.T * cert.d
        self.lambda_ = cert.lambda_
        # a transition band narrower than a few ulps of R1 cannot be resolved
        # in double precision; h then degenerates to a step at R1
        self.transition_resolved = (self.R2 - self.R1) > 64 * np.spacing(self.R2)

    # ----------------------------------------------------------- transition
    def h(self, q):
        q = np.asarray(q, dtype=float)
        if not self.transition_resolved:
            return np.where(q > self.R1, 1.0, 0.0)
        return smooth_step((q - self.R1) / (self.R2 - self.R1))

    def h_prime(self, q):
        q = np.asarray(q, dtype=float)
        if not self.transition_resolved:
            return np.zeros_like(q)
        return smooth_step_prime((q - self.R1) / (self.R2 - self.R1)) / (self.R2 - self.R1)

    # ------------------------------------------------------------ pieces
    def _parts(self, Z):
        """Per-point ``U, |v|^2, h`` and the gradient data on ``{U >= R1}``."""
        d = self.d
        x, v = Z[:, :d], Z[:, d:]
        U = self.model.value(x)
        parts = {"x": x, "v": v, "U": U, "h": self.h(U),
                 "active": U >= self.R1}
        act = parts["active"]
        g = np.zeros_like(x)
        if act.any():
            g[act] = self.model.gradient(x[act])
            g2 = np.sum(g[act] ** 2, axis=1)
            if np.any(g2 == 0):
                raise NumericsError("grad U vanishes on {U >= R1}; certificate mis-built")
        parts["gradU"] = g
        return parts

    def _psi(self, p):
        out = np.zeros(len(p["U"]))
        act = p["active"]
        if act.any():
            g = p["gradU"][act]
            vg = np.sum(p["v"][act] * g, axis=1)
            out[act] = -self.delta * self.b * p["h"][act] * vg / np.sum(g * g, axis=1)
        return out

    def psi(self, points):
        Z, scalar = as_points(self.model, points)
        out = self._psi(self._parts(Z))
        return out[0] if scalar else out

    def log_V(self, points):
        Z, scalar = as_points(self.model, points)
        p = self._parts(Z)
        H = p["U"] + 0.5 * np.sum(p["v"] ** 2, axis=1)
        out = self.b * H + self._psi(p)
        return out[0] if scalar else out

    def V(self, points):
        with np.errstate(over="ignore"):
            return np.exp(self.log_V(points))

    def log_W(self, points):
        return np.logaddexp(1.0 + self.log_V(points), math.log(self.lambda_))

    def W(self, points):
        with np.errstate(over="ignore"):
            return np.exp(self.log_W(points))

    # ------------------------------------------------------------ drift
    def lstar_ratio(self, points):
        """``L*V / V`` assembled from the potential's gradient and Hessian."""
        Z, scalar = as_points(self.model, points)
        p = self._parts(Z)
        g, T, d, b, delta = self.gamma, self.T, self.d, self.b, self.delta
        v = p["v"]
        vv = np.sum(v * v, axis=1)
        psi = self._psi(p)
        out = -b * g * (1.0 - b * T) * vv + (2.0 * b * T - 1.0) * g * psi + g * b * T * d
        act = p["active"]
        if act.any():
            x, va, gu = p["x"][act], v[act], p["gradU"][act]
            h, hp = p["h"][act], self.h_prime(p["U"][act])
            g2 = np.sum(gu * gu, axis=1)
            vg = np.sum(va * gu, axis=1)
            hv = self.model.hessian_vec(x, va)
            vhv = np.sum(va * hv, axis=1)
            vhg = np.sum(hv * gu, axis=1)
            # v . grad_x psi
            v_grad_psi = -delta * b * (hp * vg ** 2 / g2 + h * vhv / g2
                                       - 2.0 * h * vg * vhg / g2 ** 2)
            out[act] += (-delta * b * h - v_grad_psi
                         + delta ** 2 * b ** 2 * g * T * h ** 2 / g2)
        return out[0] if scalar else out

    def log_field(self):
        """``V`` as a derivative-free field, for difference cross-checks."""
        return ScalarField("V", lambda W: np.exp(self.log_V(W)))

    def psi_field(self):
        return ScalarField("psi", self.psi)

    def lstar_ratio_fd(self, points, mp, stencil=DEFAULT_STENCIL):
        """Finite-difference ``L*V / V`` (cross-validation only).

        Uses ``L*V / V = L*(log V) + gamma T |grad_v log V|^2`` with
        ``log V = b H + psi``.  The ``b H`` part enters through
        ``L* H = gamma (T d - |v|^2)``; only ``psi`` is differenced, so the
        check keeps its resolution where ``b H`` is large and ``b`` tiny.
        """
        Z, scalar = as_points(self.model, points)
        d = self.d
        v = Z[:, d:]
        psi = self.psi_field()
        lpsi = apply_Lstar(self.model, mp, psi, Z, stencil)
        grad_v = self.b * v + Y_op(psi, Z, stencil, model=self.model)
        out = (self.b * mp.gamma * (mp.T * d - np.sum(v * v, axis=1)) + lpsi
               + mp.gamma * mp.T * np.sum(grad_v ** 2, axis=1))
        return out[0] if scalar else out

    def to_dict(self):
        return {"R1": self.R1, "R2": self.R2, "b": self.b, "delta": self.delta,
                "lambda": self.lambda_}


def indicator_K(cert, model, points):
    """``|v|^2 <= (20 e^4 + 2) T d`` and ``U(x) <= R2`` (both inclusive)."""
    Z, scalar = as_points(model, points)
    d = model.dim
    inside = ((np.sum(Z[:, d:] ** 2, axis=1) <= cert.velocity_cap)
              & (model.value(Z[:, :d]) <= cert.energy_cap))
    return bool(inside[0]) if scalar else inside


@dataclass
class DriftReport:
    n_points: int
    n_in_K: int
    n_violations: int
    n_violations_relative: int
    n_offK_ratio_violations: int
    min_margin: float
    min_margin_index: int
    max_offK_ratio_over_alpha: float
    min_log_V: float
    n_below_lower_bound: int
    argmin_point: list = field(default_factory=list)
    beta_used: float = 0.0
    transition_resolved: bool = True

    @property
    def passed(self):
        return (self.n_violations == 0 and self.n_violations_relative == 0
                and self.n_offK_ratio_violations == 0 and self.n_below_lower_bound == 0)

    def to_dict(self):
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), default=float)


def drift_check(weight, points, beta=None, atol=1e-8):
    """Check ``L* Vt <= -alpha Vt + beta 1_K`` for the normalised ``Vt = e V``.

    Division by ``Vt`` gives the overflow-free form
    ``ratio <= -alpha + (beta 1_K + atol) e^{-log Vt} + atol alpha``, which is
    the stated inequality with absolute tolerance ``atol (1 + alpha Vt)``.
    ``beta`` defaults to the certificate's ``beta_exact``.  Off ``K`` the
    stronger ``ratio <= -alpha`` is also required, and ``V >= 1/e`` is
    checked everywhere.  The margin reported is the slack of the first
    inequality in ratio form.
    """
    cert, model = weight.cert, weight.model
    beta = cert.beta_exact if beta is None else beta
    Z, _ = as_points(model, points)
    ratio = weight.lstar_ratio(Z)
    log_vt = 1.0 + weight.log_V(Z)
    in_K = indicator_K(cert, model, Z)
    inv_vt = np.exp(-log_vt)
    allowed = -cert.alpha + (beta * in_K + atol) * inv_vt + atol * cert.alpha
    margin = allowed - ratio
    # same inequality with a tolerance proportional to alpha; meaningful when
    # alpha is far below atol (large R2)
    strict = -cert.alpha + beta * in_K * inv_vt + 1e-8 * cert.alpha * (1.0 + inv_vt) - ratio
    off = ~in_K
    off_excess = ratio[off] + cert.alpha
    off_bad = int(np.sum(off_excess > atol * cert.alpha))
    worst = int(np.argmin(margin))
    lower_bad = int(np.sum(log_vt < -1e-12))
    return DriftReport(
        n_points=len(Z), n_in_K=int(in_K.sum()), n_violations=int(np.sum(margin < 0)),
        n_violations_relative=int(np.sum(strict < 0)),
        n_offK_ratio_violations=off_bad, min_margin=float(margin[worst]),
        min_margin_index=worst,
        max_offK_ratio_over_alpha=float(np.max(ratio[off]) / cert.alpha) if off.any() else float("nan"),
        min_log_V=float(np.min(log_vt - 1.0)), n_below_lower_bound=lower_bad,
        argmin_point=Z[worst].tolist(), beta_used=float(beta),
        transition_resolved=bool(weight.transition_resolved),
    )


def psi_bound_check(weight, points):
    """Global bound ``|psi| <= (b/2)|v|^2 + b T d h^2 / 36`` (and ``<= (b/2)|v|^2 + 1``)."""
    Z, _ = as_points(weight.model, points)
    d = weight.d
    psi = np.abs(weight.psi(Z))
    U = weight.model.value(Z[:, :d])
    half = 0.5 * weight.b * np.sum(Z[:, d:] ** 2, axis=1)
    fine = half + weight.b * weight.T * d * weight.h(U) ** 2 / 36.0
    tol = 1e-12 * (1.0 + half)
    return {"n_points": len(Z), "n_violations": int(np.sum(psi > fine + tol)),
            "n_violations_coarse": int(np.sum(psi > half + 1.0 + tol)),
            "max_excess": float(np.max(psi - fine))}


# ---------------------------------------------------------------------------
# hypotheses linking the weight, the drift and the invariant measure
# ---------------------------------------------------------------------------

def check_weight_hypotheses(cert, weight, samples, mu_estimates, rng=None,
                               n_directions=4, n_sigma=3.0):
    """Check the two conditions linking ``W``, ``V`` and the tail of ``mu``.

    W-domination: ``W |y|^2 >= (beta rho' + 1)(R(x, y)/(gamma T) + |y|^2/(2T))``
    on every sample and ``n_directions`` random unit ``y``, compared in logs.
    Tail condition: with ``e V >= 1`` it suffices that
    ``(2 beta / alpha) mu(K^c) / mu(K) <= 1``; it is evaluated at the
    estimate and at the upper ``n_sigma`` confidence bound of ``mu(K^c)``.
    ``mu_estimates`` holds ``mu_K``, ``mu_Kc`` and ``stderr``.
    """
    rng = np.random.default_rng(rng)
    model = weight.model
    Z, _ = as_points(model, samples)
    d = model.dim
    x = Z[:, :d]
    q = cert.beta * cert.rho_K_prime + 1.0
    log_w = weight.log_W(Z)
    worst = math.inf
    n_bad = 0
    for _ in range(n_directions):
        y = rng.standard_normal(x.shape)
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        rhs = q * (R_term(model, ModelParams(cert.gamma, cert.T, N=cert.d), x, y) / (cert.gamma * cert.T)
                   + 1.0 / (2.0 * cert.T))
        slack = log_w - np.log(rhs)
        n_bad += int(np.sum(slack < -1e-12))
        worst = min(worst, float(slack.min()))

    mu_K = float(mu_estimates["mu_K"])
    mu_Kc = float(mu_estimates["mu_Kc"])
    se = float(mu_estimates.get("stderr", 0.0))
    factor = 2.0 * cert.beta / cert.alpha
    tail = factor * mu_Kc / mu_K if mu_K > 0 else math.inf
    upper = mu_Kc + n_sigma * se
    tail_upper = factor * upper / max(mu_K - n_sigma * se, 1e-300)
    return {
        "w_domination": {"n_checks": len(Z) * n_directions, "n_violations": n_bad,
                         "min_log_slack": worst},
        "tail": {"two_beta_over_alpha": factor, "mu_K": mu_K, "mu_Kc": mu_Kc,
                 "stderr": se, "ratio": tail, "ratio_upper": tail_upper,
                 "passed": bool(tail <= 1.0)},
        "passed": bool(n_bad == 0 and tail <= 1.0),
    }


# ---------------------------------------------------------------------------
# stress grids
# ---------------------------------------------------------------------------

def _base_configurations(model, n_rays, rng):
    from .potential import SingularPair, initial_position

    d = model.dim
    if isinstance(model, SingularPair):
        x0 = initial_position(model)
        out = []
        while len(out) < n_rays:
            trial = x0 + 0.3 * rng.standard_normal(d)
            if model.in_domain(trial):
                out.append(trial)
        return np.array(out)
    u = rng.standard_normal((n_rays, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def positions_at_energies(model, targets, n_rays=8, rng=None, s_max=1e3):
    """Positions with ``U`` equal to each target, along dilation rays.

    For every ray ``s -> s x0`` the outer increasing branch of ``U`` is
    bracketed and bisected.
    """
    rng = np.random.default_rng(rng)
    bases = _base_configurations(model, n_rays, rng)
    out = []
    for x0 in bases:
        top = float(np.max(targets))
        while model.value(s_max * x0) < top and s_max < 1e150:
            s_max *= 10.0
        s_grid = np.geomspace(1e-3, s_max, 400)
        U = model.value(s_grid[:, None] * x0)
        start = int(np.argmin(U))
        for q in np.atleast_1d(targets):
            above = np.flatnonzero(U[start:] >= q)
            if above.size == 0:
                continue
            j = start + above[0]
            lo, hi = (s_grid[j - 1] if j > start else s_grid[start]), s_grid[j]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if model.value(mid * x0) >= q:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-15 * hi:
                    break
            out.append(hi * x0)
    return np.array(out)


def velocity_family(x, cert, model, rng):
    """Velocities at ``x``: zero, random at several speeds, and along ``+-grad U``."""
    Td = cert.T * cert.d
    speeds2 = np.array([0.1, 1.0, 8.0, 64.0, cert.velocity_cap / Td,
                        1.0001 * cert.velocity_cap / Td, 100.0 * cert.velocity_cap / Td]) * Td
    d = model.dim
    rows = [np.concatenate([x, np.zeros(d)])]
    g = model.gradient(x)
    gdir = g / max(np.linalg.norm(g), 1e-300)
    for s2 in speeds2:
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        for w in (u, gdir, -gdir):
            rows.append(np.concatenate([x, math.sqrt(s2) * w]))
    return rows


def stress_grid(model, cert, rng=None, n_rays=8, n_levels=24, extra_positions=None):
    """Phase points covering ``[R1, R2]`` and beyond, large speeds and the minimum.

    ``extra_positions`` (e.g. near-singular configurations) are combined with
    the same velocity family.
    """
    rng = np.random.default_rng(rng)
    levels = np.concatenate([
        np.linspace(0.0, cert.R1, 6)[1:],
        np.linspace(cert.R1, cert.R2, n_levels),
        cert.R2 * np.array([1.01, 1.5, 3.0, 10.0, 100.0]),
    ])
    xs = list(positions_at_energies(model, levels, n_rays=n_rays, rng=rng))
    if extra_positions is not None:
        xs.extend(np.atleast_2d(extra_positions))
    rows = []
    for x in xs:
        rows.extend(velocity_family(np.asarray(x, dtype=float), cert, model, rng))
    return np.array(rows)
