"""Explicit convergence-rate certificates.

Two routes are provided.  The general route turns the growth constants of a
potential plus a local Poincare constant into the weight ``W = e V + lambda``
and rate ``sigma``; the bounded-Hessian (Villani) route needs a global
Poincare constant and a Hessian bound ``M``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_int, check_positive
from .errors import CertificateError
from .potential import DoubleWell, GrowthConstants, SingleWell, SingularPair

E4 = math.exp(4.0)
VELOCITY_CAP_FACTOR = 20.0 * E4 + 2.0

RHO_SOURCES = ("user-supplied", "spectral-estimated")


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    T: float
    N: int = 1
    k: int = 1

    def __post_init__(self):
        # zero friction/temperature is allowed for simulation; certificates
        # reject it through require_positive
        check_positive("gamma", self.gamma, allow_zero=True)
        check_positive("T", self.T, allow_zero=True)
        check_int("N", self.N, minimum=1)
        check_int("k", self.k, minimum=1)

    @property
    def d(self):
        return self.N * self.k

    @property
    def Td(self):
        return self.T * self.d

    def require_positive(self):
        if not (self.gamma > 0 and self.T > 0):
            raise ValueError(f"certificates need gamma > 0 and T > 0, got {self.gamma}, {self.T}")
        return self


def friction_constant(gamma):
    """Root ``c`` of ``c^2 - gamma c - 1 = 0``, used to mix x and v gradients."""
    gamma = check_positive("gamma", gamma)
    return gamma / 2.0 + math.sqrt(gamma * gamma / 4.0 + 1.0)


# ---------------------------------------------------------------------------
# growth constants for the three families
# ---------------------------------------------------------------------------

def growth_constants_singular(N, k, A, B, a, b, T):
    """Closed-form growth constants of the singular pair potential."""
    N = check_int("N", N, minimum=1)
    k = check_int("k", k, minimum=1)
    A, B, b, T = (check_positive(n, v) for n, v in (("A", A), ("B", B), ("b", b), ("T", T)))
    if isinstance(a, bool) or float(a) != int(a) or int(a) < 2 or int(a) % 2:
        raise ValueError(f"a must be an even integer >= 2, got {a}")
    a = int(a)

    kappa2 = (
        N ** (5 - 8 / a) * A * a * (a - 1) * k
        * (128 * (a - 1) * k ** 2 * T / (A * a)) ** ((a - 2) / a)
        + N ** (10 + 16 / b) * 4 * B * b * (b + 3) * k
        * (512 * (b + 3) * k ** 2 * T / (B * b)) ** ((b + 2) / b)
        + A ** 2 * a ** 2 / (8 * N ** 2 * k * T)
        + B ** 2 * b ** 2 * N ** (2 * b + 4) / (8 * k * T)
    )
    c0 = N ** 3 * 4 * b ** 2 / B ** (2 / b)
    e0 = (a - 1) * b / (a + b)
    d0 = (N ** (1 - 2 * e0) * 2 * A ** 2 * a ** 2
          * (A ** (2 / b) * b ** 2 / (B ** (2 / b) * a ** 2)) ** e0)
    c_inf = A ** (2 / a) * a ** 2 / (2 ** (5 - 2 / a) * N ** (5 - 2 / a))
    d_inf = (
        N ** (b * (6 * a - 2) * (a - 1) / (a * (a + b)) + 2 / a - 1)
        * A ** (2 / a) * a ** 2 * B ** 2 / (8 * B ** (2 / a))
        * (A ** (2 / a) * a ** 2 / (B ** (2 / a) * b ** 2)) ** (b * (a - 1) / (a + b))
        + 2 * A ** 2 * a ** 2 / N
        + 2 * B ** 2 * b ** 2 * N ** (2 * b + 5)
    )
    return GrowthConstants(kappa2=kappa2, c0=c0, d0=d0, c_inf=c_inf, d_inf=d_inf,
                           eta0=b, eta_inf=float(a))


def growth_constants_single_well():
    """``|grad U|^2 = 2U`` and unit Hessian: 2U - 1 <= 2U <= 2U^4 + 1."""
    return GrowthConstants(kappa2=1.0, c0=2.0, d0=1.0, c_inf=2.0, d_inf=1.0,
                           eta0=1.0, eta_inf=2.0)


def growth_constants_double_well(T, d):
    """Growth constants for ``(|x|^2 - 1)^2 / 4`` in dimension ``d``.

    With ``s = |x|^2`` one has ``|grad U|^2 = 4 s U`` and
    ``s = 1 +- 2 sqrt(U)``, giving ``8 U^{3/2} - 1 <= |grad U|^2 <=
    12 U^{3/2} + 4``.  The Hessian has eigenvalues ``s - 1`` and ``3s - 1``;
    ``kappa2`` is the maximum of ``3s - 1 - s (s-1)^2 / (16 T d)``, attained
    at ``s* = (2 + sqrt(1 + 144 T d)) / 3``, floored at 1 for ``s < 1/2``.
    """
    T = check_positive("T", T)
    d = check_int("d", d, minimum=1)
    Td = T * d
    s = (2.0 + math.sqrt(1.0 + 144.0 * Td)) / 3.0
    peak = 3.0 * s - 1.0 - s * (s - 1.0) ** 2 / (16.0 * Td)
    kappa2 = max(1.0, peak) * (1.0 + 1e-12)
    return GrowthConstants(kappa2=kappa2, c0=12.0, d0=4.0, c_inf=8.0, d_inf=1.0,
                           eta0=-4.0, eta_inf=4.0)


def growth_constants_for(model, T):
    if isinstance(model, SingularPair):
        return growth_constants_singular(model.N, model.k, model.A, model.B,
                                         model.a, model.b, T)
    if isinstance(model, DoubleWell):
        return growth_constants_double_well(T, model.dim)
    if isinstance(model, SingleWell):
        return growth_constants_single_well()
    raise ValueError(f"no growth constants known for {model!r}")


# ---------------------------------------------------------------------------
# general route
# ---------------------------------------------------------------------------

def compute_R1_R2(gc, mp):
    """Energy thresholds where the Lyapunov correction switches on/saturates."""
    if gc.eta_inf <= 1:
        raise ValueError(f"eta_inf must exceed 1, got {gc.eta_inf}")
    Td = mp.Td
    inner = max((40.0 * E4 + 4.0) * Td * (gc.kappa2 + 1.0), 92.0 * mp.gamma ** 2 * Td)
    base = gc.d_inf / gc.c_inf + inner / gc.c_inf
    R1 = base ** (1.0 / (2.0 - 2.0 / gc.eta_inf))
    return R1, R1 + 32.0 * Td


def D_of_r(r, gc, mp):
    """Pointwise bound ``(R(x,y)/(gamma T) + |y|^2/(2T)) / |y|^2`` at ``U = r``.

    Includes the ``+2`` coming from the ``2|y|^2/gamma`` part of ``R``.
    """
    kp = 1.0 / (16.0 * mp.Td)
    r = np.asarray(r, dtype=float)
    num = (2.0 * (gc.c0 * kp) ** 2 * r ** (4.0 + 4.0 / gc.eta0)
           + 2.0 * (gc.d0 * kp) ** 2 + gc.kappa2 ** 2 + 2.0)
    out = num / (mp.gamma ** 2 * mp.T) + 1.0 / (2.0 * mp.T)
    return float(out) if out.ndim == 0 else out


def compute_alpha_beta(mp, R2):
    """Drift constants of the Lyapunov function with ``b = 1/R2``.

    Returns ``(alpha, beta, beta_exact)``: ``beta`` carries the rounded
    ``e^4`` factor used for ``sigma``; ``beta_exact`` is the sharper constant
    of the normalised (strong) function ``e V``.
    """
    R2 = check_positive("R2", R2)
    scale = mp.gamma * mp.Td / R2
    alpha = scale / 4.0
    beta = 1.25 * scale * E4
    beta_exact = 1.25 * scale * math.exp(2.0 + 5.0 * mp.Td / R2)
    return alpha, beta, beta_exact


def solve_lambda0(gc, mp, beta, rho_K_prime, R2, D=None, rtol=1e-14):
    """Smallest ``l`` with ``r >= R2 log D(r) + R2 log(beta rho' + 1)`` for r >= l.

    ``D`` defaults to :func:`D_of_r`; a callable may be passed to override it.
    Bisection on a doubling bracket; beyond ``p * R2`` (``p`` the exponent of
    ``D``) the gap is increasing, and below that point a log-spaced scan
    locates the last sign change before bisecting.
    """
    if D is None:
        def D(r):
            return D_of_r(r, gc, mp)
    shift = R2 * math.log(beta * rho_K_prime + 1.0)

    def gap(r):
        return r - R2 * math.log(D(r)) - shift

    lo = max(shift, 1e-300)
    power = 4.0 + 4.0 / gc.eta0 if gc is not None else 0.0
    hi = max(2.0 * lo, power * R2, 1.0)
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise CertificateError("no lambda0 below 1e300")
    grid = np.geomspace(lo, hi, 4001)
    neg = np.flatnonzero(np.array([gap(r) for r in grid]) < 0)
    if neg.size == 0:
        return lo
    left, hi = float(grid[neg[-1]]), float(grid[neg[-1] + 1])
    while hi - left > rtol * hi:
        mid = 0.5 * (left + hi)
        if mid in (left, hi):
            break
        if gap(mid) >= 0:
            hi = mid
        else:
            left = mid
    return hi


@dataclass
class Certificate:
    """Every constant of the general-route certificate.

    ``rho_K_source`` records whether the local Poincare constant was given by
    the user or estimated numerically; the rate is only as good as that
    constant.
    """

    gamma: float
    T: float
    d: int
    growth: dict
    c_gamma: float
    kappa_prime: float
    R1: float
    R2: float
    alpha: float
    beta: float
    beta_exact: float
    rho_K: float
    rho_K_source: str
    rho_K_prime: float
    lambda0: float
    D_lambda0: float
    lambda_: float
    zeta_sq: float
    sigma: float
    velocity_cap: float
    energy_cap: float
    rho_K_diagnostics: dict = field(default_factory=dict)

    FORMULAS = {
        "c_gamma": "c = gamma/2 + sqrt(gamma^2/4 + 1)",
        "kappa_prime": "kappa' = 1/(16 T d)",
        "R1": "R1 = (d_inf/c_inf + max((40e^4+4) T d (kappa''+1), 92 gamma^2 T d)/c_inf)^(1/(2-2/eta_inf))",
        "R2": "R2 = R1 + 32 T d",
        "alpha": "alpha = gamma T d / (4 R2)",
        "beta": "beta = 5 gamma T d e^4 / (4 R2)",
        "beta_exact": "beta_exact = 5 gamma T d e^(2 + 5 T d / R2) / (4 R2)",
        "rho_K_prime": "rho_K' = (4 c^2 + 4) rho_K / gamma",
        "lambda0": "smallest l with r >= R2 log D(r) + R2 log(beta rho_K' + 1) for all r >= l",
        "D_lambda0": "D(r) = (2 (c0 kappa')^2 r^(4+4/eta0) + 2 (d0 kappa')^2 + kappa''^2 + 2)/(gamma^2 T) + 1/(2T)",
        "lambda_": "lambda = max(1, (beta rho_K' + 1) D(lambda0))",
        "zeta_sq": "zeta^2 = 2 / (1 + beta rho_K')",
        "sigma": "sigma = min(alpha / (2 (1 + lambda)), gamma / (1 + beta rho_K'))",
        "velocity_cap": "K velocity cap |v|^2 <= (20 e^4 + 2) T d",
        "energy_cap": "K energy cap U <= R2",
    }

    @property
    def b(self):
        return 1.0 / self.R2

    def check_invariants(self, rtol=1e-12):
        """Return the list of violated invariants (empty when consistent)."""
        bad = []
        Td = self.T * self.d
        if not math.isclose(self.R2, self.R1 + 32 * Td, rel_tol=rtol):
            bad.append("R2 != R1 + 32 T d")
        q = self.beta * self.rho_K_prime
        if not math.isclose(self.zeta_sq, 2.0 / (1.0 + q), rel_tol=rtol):
            bad.append("zeta_sq")
        expect = min(self.alpha / (2 * (1 + self.lambda_)), self.gamma / (1 + q))
        if not math.isclose(self.sigma, expect, rel_tol=rtol):
            bad.append("sigma")
        if self.lambda_ < (q + 1) * self.D_lambda0 * (1 - rtol):
            bad.append("lambda below (beta rho' + 1) D(lambda0)")
        if self.lambda0 < (self.R2 * math.log(self.D_lambda0) + self.R2 * math.log(q + 1)) * (1 - rtol):
            bad.append("lambda0 inequality")
        if not self.sigma > 0:
            bad.append("sigma not positive")
        if not 0 < self.zeta_sq <= 2:
            bad.append("zeta_sq outside (0, 2]")
        if not 0 < self.b <= 1 / (2 * Td):
            bad.append("b = 1/R2 outside (0, 1/(2 T d)]")
        return bad

    def to_dict(self):
        out = asdict(self)
        out["route"] = "general"
        out["b"] = self.b
        out["formulas"] = dict(self.FORMULAS)
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def build_certificate(model, gc, mp, rho_K, rho_K_source="user-supplied",
                      rho_K_diagnostics=None):
    """Assemble the general-route certificate."""
    mp.require_positive()
    rho_K = check_positive("rho_K", rho_K)
    if rho_K_source not in RHO_SOURCES:
        raise ValueError(f"rho_K_source must be one of {RHO_SOURCES}")
    if model is not None and model.dim != mp.d:
        raise ValueError(f"model dimension {model.dim} != N k = {mp.d}")
    c = friction_constant(mp.gamma)
    R1, R2 = compute_R1_R2(gc, mp)
    alpha, beta, beta_exact = compute_alpha_beta(mp, R2)
    rho_p = (4.0 * c * c + 4.0) * rho_K / mp.gamma
    lam0 = solve_lambda0(gc, mp, beta, rho_p, R2)
    D0 = D_of_r(lam0, gc, mp)
    q = beta * rho_p
    lam = max(1.0, (q + 1.0) * D0)
    if not math.isfinite(lam):
        raise CertificateError("lambda overflowed")
    sigma = min(alpha / (2.0 * (1.0 + lam)), mp.gamma / (1.0 + q))
    return Certificate(
        gamma=mp.gamma, T=mp.T, d=mp.d, growth=gc.to_dict(), c_gamma=c,
        kappa_prime=1.0 / (16.0 * mp.Td), R1=R1, R2=R2, alpha=alpha, beta=beta,
        beta_exact=beta_exact, rho_K=rho_K, rho_K_source=rho_K_source,
        rho_K_prime=rho_p, lambda0=lam0, D_lambda0=D0, lambda_=lam,
        zeta_sq=2.0 / (1.0 + q), sigma=sigma,
        velocity_cap=VELOCITY_CAP_FACTOR * mp.Td, energy_cap=R2,
        rho_K_diagnostics=dict(rho_K_diagnostics or {}),
    )


# ---------------------------------------------------------------------------
# bounded-Hessian route
# ---------------------------------------------------------------------------

@dataclass
class VillaniCertificate:
    gamma: float
    T: float
    d: int
    M_sq: float
    zeta_sq: float
    sigma: float
    rho: float
    kappa0: float | None = None
    kappa0_prime: float | None = None

    def to_dict(self):
        out = asdict(self)
        out["route"] = "villani"
        out["formulas"] = {
            "zeta_sq": "zeta^2 = (2 + M^2)/(gamma^2 T) + c^2/(2T) + 1/(4T)",
            "sigma": "sigma = (gamma/4) min(1, 1/(rho zeta^2))",
            "M_sq": ("M^2 = 2 gamma^2 T kappa0 d/(4c^2) + sqrt(2d) kappa0' gamma^2/(4c^2) + kappa0'^2"
                     if self.kappa0 is not None else "M^2 = (global Hessian bound)^2"),
        }
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def kappa0_threshold(mp):
    c = friction_constant(mp.gamma)
    return mp.gamma / (2.0 * math.sqrt(mp.T + mp.T * c * c))


def double_well_kappas(mp):
    """Gradient-relative Hessian constants of the double well."""
    k0 = kappa0_threshold(mp)
    return k0, 27.0 / k0 ** 2 + 2.0


def villani_certificate(mp, rho, M=None, kappas=None):
    """Rate for a bounded Hessian (``M``) or a Villani-type pair ``kappas``.

    ``kappas = (kappa0, kappa0_prime)`` bounds ``|D2U y| <= kappa0 |grad U| |y|
    + kappa0_prime |y|`` and requires ``kappa0`` below
    ``gamma / (2 sqrt(T + T c^2))``.
    """
    mp.require_positive()
    rho = check_positive("rho", rho)
    if (M is None) == (kappas is None):
        raise ValueError("give exactly one of M or kappas")
    c = friction_constant(mp.gamma)
    g, T, d = mp.gamma, mp.T, mp.d
    k0 = k0p = None
    if M is not None:
        M_sq = check_positive("M", M, allow_zero=True) ** 2
    else:
        k0, k0p = (check_positive("kappa0", kappas[0]), check_positive("kappa0_prime", kappas[1]))
        limit = kappa0_threshold(mp)
        if k0 > limit * (1 + 1e-12):
            raise ValueError(
                f"kappa0 = {k0} exceeds the Villani-condition threshold "
                f"gamma / (2 sqrt(T + T c^2)) = {limit}")
        M_sq = (2 * g * g * T * k0 * d / (4 * c * c)
                + math.sqrt(2 * d) * k0p * g * g / (4 * c * c) + k0p ** 2)
    zeta_sq = (2.0 + M_sq) / (g * g * T) + c * c / (2.0 * T) + 1.0 / (4.0 * T)
    sigma = g / 4.0 * min(1.0, 1.0 / (rho * zeta_sq))
    return VillaniCertificate(gamma=g, T=T, d=d, M_sq=M_sq, zeta_sq=zeta_sq,
                              sigma=sigma, rho=rho, kappa0=k0, kappa0_prime=k0p)
