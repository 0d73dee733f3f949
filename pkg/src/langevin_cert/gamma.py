"""Carre-du-champ calculus for the kinetic Langevin generator.

Phase points are rows ``z = (x, v)`` of length ``2d``; every routine accepts
a single row, a :class:`PhasePoint`, or a batch of shape ``(n, 2d)``.
Test fields may carry analytic gradients and Hessians.  Where they are
missing, central differences are used, and the iterated forms are built by
nesting those differences.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._validation import check_phase_points, check_positive
from .certificate import friction_constant
from .errors import DomainError
from .potential import PhasePoint


class NumericalQualityWarning(UserWarning):
    """Step-halving disagreement of a finite-difference value is too large."""


@dataclass(frozen=True)
class StencilConfig:
    """Central-difference steps.

    The step along coordinate ``j`` is ``h * max(1, |z_j|)``.  When a
    difference is taken of a quantity that is itself a finite difference,
    the outer step is multiplied by ``nested_factor`` to keep round-off in
    check.
    """

    h_x: float = 1e-4
    h_v: float = 1e-4
    nested_factor: float = 10.0
    quality_tol: float = 1e-3

    def __post_init__(self):
        for name in ("h_x", "h_v", "nested_factor", "quality_tol"):
            check_positive(name, getattr(self, name))

    def steps(self, Z, outer=False):
        d = Z.shape[1] // 2
        base = np.concatenate([np.full(d, self.h_x), np.full(d, self.h_v)])
        if outer:
            base = base * self.nested_factor
        return base * np.maximum(1.0, np.abs(Z))

    def halved(self):
        return replace(self, h_x=self.h_x / 2, h_v=self.h_v / 2)


DEFAULT_STENCIL = StencilConfig()
# coarser base step for the extrapolated iterated forms: truncation is
# removed by extrapolation, so a larger step keeps nested round-off small
GAMMA2_STENCIL = StencilConfig(h_x=4e-4, h_v=4e-4)


@dataclass(frozen=True)
class ScalarField:
    """A smooth function of the phase point, evaluated on batches of rows.

    ``func`` maps ``(n, 2d) -> (n,)``.  ``grad`` (``-> (n, 2d)``) and
    ``hess`` (``-> (n, 2d, 2d)``) are optional analytic derivatives.
    ``noise_order`` counts the difference levels already inside the values
    (0 for exact fields); it decides when outer steps must be enlarged.
    """

    name: str
    func: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    noise_order: int = 0

    def __call__(self, Z):
        return np.asarray(self.func(Z), dtype=float)

    def without_hessian(self):
        return replace(self, hess=None)

    def without_derivatives(self):
        return replace(self, grad=None, hess=None)

    def gradient(self, Z, stencil=DEFAULT_STENCIL):
        if self.grad is not None:
            return np.asarray(self.grad(Z), dtype=float)
        return fd_gradient(self, Z, stencil.steps(Z, outer=self.noise_order >= 2))

    def hessian(self, Z, stencil=DEFAULT_STENCIL):
        if self.hess is not None:
            return np.asarray(self.hess(Z), dtype=float)
        if self.grad is not None:
            return fd_jacobian(self.grad, Z, stencil.steps(Z))
        H = fd_jacobian(lambda W: fd_gradient(self, W, stencil.steps(W)), Z,
                        stencil.steps(Z, outer=True))
        return 0.5 * (H + np.swapaxes(H, -1, -2))


# ---------------------------------------------------------------------------
# finite differences on batches
# ---------------------------------------------------------------------------

def _shifted(Z, steps, coords):
    """Stack of ``Z +- h_j e_j`` for ``j`` in ``coords``: shape ``(2m, n, D)``."""
    m = len(coords)
    out = np.repeat(Z[None], 2 * m, axis=0)
    for i, j in enumerate(coords):
        out[2 * i, :, j] += steps[:, j]
        out[2 * i + 1, :, j] -= steps[:, j]
    return out


def _eval_stack(F, stack):
    s, n, D = stack.shape
    vals = np.asarray(F(stack.reshape(s * n, D)), dtype=float)
    return vals.reshape((s, n) + vals.shape[1:])


def fd_gradient(F, Z, steps, coords=None):
    """Central-difference gradient of a scalar batch function."""
    D = Z.shape[1]
    coords = list(range(D)) if coords is None else list(coords)
    vals = _eval_stack(F, _shifted(Z, steps, coords))
    h = steps[:, coords].T
    return ((vals[0::2] - vals[1::2]) / (2.0 * h)).T


def fd_jacobian(G, Z, steps, coords=None):
    """``J[n, i, j] = d G_i / d z_j`` by central differences."""
    D = Z.shape[1]
    coords = list(range(D)) if coords is None else list(coords)
    vals = _eval_stack(G, _shifted(Z, steps, coords))
    h = steps[:, coords].T[..., None]
    J = (vals[0::2] - vals[1::2]) / (2.0 * h)
    return np.moveaxis(J, 0, -1)


def fd_second(F, Z, steps, coords):
    """Sum over ``coords`` of pure second differences."""
    vals = _eval_stack(F, _shifted(Z, steps, coords))
    centre = np.asarray(F(Z), dtype=float)
    h2 = (steps[:, coords] ** 2).T
    return np.sum((vals[0::2] - 2.0 * centre + vals[1::2]) / h2, axis=0)


# ---------------------------------------------------------------------------
# point handling
# ---------------------------------------------------------------------------

def as_points(model, p):
    """Return ``(Z, scalar)`` with ``Z`` of shape ``(n, 2d)``."""
    if isinstance(p, PhasePoint):
        p = p.z
    Z = check_phase_points(p, model.dim)
    scalar = np.ndim(p) == 1
    if not np.all(model.in_domain(Z[:, :model.dim])):
        raise DomainError("phase point outside the state space")
    return Z, scalar


def _out(vals, scalar):
    return vals[0] if scalar else vals


def _split(Z):
    d = Z.shape[1] // 2
    return Z[:, :d], Z[:, d:]


# ---------------------------------------------------------------------------
# generator and adjoint
# ---------------------------------------------------------------------------

def _laplacian_v(f, Z, stencil):
    d = Z.shape[1] // 2
    if f.hess is not None:
        H = f.hessian(Z)
        return np.trace(H[:, d:, d:], axis1=1, axis2=2)
    if f.grad is not None:
        steps = stencil.steps(Z)
        total = 0.0
        for j in range(d, 2 * d):
            total = total + fd_gradient(lambda W, j=j: f.grad(W)[:, j], Z, steps,
                                        coords=[j])[:, 0]
        return total
    return fd_second(f, Z, stencil.steps(Z, outer=f.noise_order >= 1),
                     list(range(d, 2 * d)))


def _generator(model, mp, f, Z, stencil, sign):
    x, v = _split(Z)
    g = f.gradient(Z, stencil)
    gx, gv = _split(g)
    gradU = model.gradient(x)
    transport = np.sum(v * gx, axis=1) - np.sum(gradU * gv, axis=1)
    friction = -mp.gamma * np.sum(v * gv, axis=1)
    diffusion = mp.gamma * mp.T * _laplacian_v(f, Z, stencil)
    return sign * transport + friction + diffusion


def apply_L(model, mp, f, p, stencil=DEFAULT_STENCIL):
    """Generator ``v.grad_x - gamma v.grad_v - grad U.grad_v + gamma T Lap_v``."""
    Z, scalar = as_points(model, p)
    return _out(_generator(model, mp, f, Z, stencil, 1.0), scalar)


def apply_Lstar(model, mp, f, p, stencil=DEFAULT_STENCIL):
    """Adjoint with the Hamiltonian transport reversed."""
    Z, scalar = as_points(model, p)
    return _out(_generator(model, mp, f, Z, stencil, -1.0), scalar)


def L_field(model, mp, f, stencil=DEFAULT_STENCIL):
    """``Lf`` as a (numerically evaluated) field."""
    extra = 0 if f.hess is not None else (1 if f.grad is not None else 2)
    return ScalarField(f"L({f.name})",
                       lambda W: _generator(model, mp, f, W, stencil, 1.0),
                       noise_order=f.noise_order + extra)


# ---------------------------------------------------------------------------
# Y, Z and the Gamma forms
# ---------------------------------------------------------------------------

def _loose_points(p, model):
    if model is not None:
        return as_points(model, p)
    raw = p.z if isinstance(p, PhasePoint) else np.asarray(p, dtype=float)
    return np.atleast_2d(raw), np.ndim(raw) == 1


def Y_op(f, p, stencil=DEFAULT_STENCIL, model=None):
    """``Yf = grad_v f``; pass ``model`` to have the point validated."""
    Z, scalar = _loose_points(p, model)
    return _out(_split(f.gradient(Z, stencil))[1], scalar)


def Z_op(model, mp, f, p, stencil=DEFAULT_STENCIL):
    """``Zf = grad_x f - c(gamma) grad_v f``."""
    Zp, scalar = as_points(model, p)
    gx, gv = _split(f.gradient(Zp, stencil))
    return _out(gx - friction_constant(mp.gamma) * gv, scalar)


def modified_gradient_sq(model, mp, f, p, zeta, stencil=DEFAULT_STENCIL):
    """``|grad_zeta f|^2`` with ``grad_zeta = zeta^{-1} (Y, Z)``."""
    Zp, scalar = as_points(model, p)
    gx, gv = _split(f.gradient(Zp, stencil))
    zf = gx - friction_constant(mp.gamma) * gv
    vals = (np.sum(gv ** 2, axis=1) + np.sum(zf ** 2, axis=1)) / zeta ** 2
    return _out(vals, scalar)


def gamma_form(mp, f, p, stencil=DEFAULT_STENCIL, model=None):
    """``Gamma(f) = gamma T |grad_v f|^2``."""
    Z, scalar = _loose_points(p, model)
    yf = _split(f.gradient(Z, stencil))[1]
    return _out(mp.gamma * mp.T * np.sum(yf ** 2, axis=1), scalar)


def _square(f):
    grad = None
    if f.grad is not None:
        def grad(W):
            return 2.0 * f(W)[:, None] * f.grad(W)
    return ScalarField(f"({f.name})^2", lambda W: f(W) ** 2, grad=grad,
                       noise_order=f.noise_order)


def gamma_form_def(model, mp, f, p, stencil=DEFAULT_STENCIL):
    """``Gamma(f) = (L f^2 - 2 f L f) / 2`` by finite differences."""
    Z, scalar = as_points(model, p)
    g = f.without_hessian()
    lf2 = _generator(model, mp, _square(g), Z, stencil, 1.0)
    lf = _generator(model, mp, g, Z, stencil, 1.0)
    return _out(0.5 * (lf2 - 2.0 * f(Z) * lf), scalar)


def _directional(model, mp, which, grad):
    gx, gv = _split(grad)
    if which == "Y":
        return gv
    return gx - friction_constant(mp.gamma) * gv


def _check_which(which):
    if which not in ("Y", "Z"):
        raise ValueError(f"which must be 'Y' or 'Z', got {which!r}")


def gamma2_def(model, mp, which, f, p, stencil=GAMMA2_STENCIL, quality_check=True,
               extrapolate=True):
    """Iterated form ``(L Gamma^W(f) - 2 Gamma^W(f, Lf)) / 2`` for ``W = Y, Z``.

    Only the first derivatives of ``f`` are taken analytically (when given);
    everything above is nested central differences.  With ``extrapolate``
    the values at steps ``h`` and ``h/2`` are combined by one Richardson step
    ``(4 D(h/2) - D(h)) / 3``, which removes the leading ``h^2`` truncation
    term.  With ``quality_check`` a :class:`NumericalQualityWarning` is
    issued when the two step sizes disagree by more than ``quality_tol``.
    """
    _check_which(which)
    Z, scalar = as_points(model, p)
    vals = _gamma2_def(model, mp, which, f, Z, stencil)
    if extrapolate or quality_check:
        half = _gamma2_def(model, mp, which, f, Z, stencil.halved())
    if quality_check:
        scale = np.maximum(np.abs(vals), 1.0)
        worst = float(np.max(np.abs(vals - half) / scale))
        if worst > stencil.quality_tol:
            warnings.warn(f"gamma2_def({which}, {f.name}): step-halving disagreement "
                          f"{worst:.2e}", NumericalQualityWarning, stacklevel=2)
    if extrapolate:
        vals = (4.0 * half - vals) / 3.0
    return _out(vals, scalar)


def _gamma2_def(model, mp, which, f, Z, stencil):
    g = f.without_hessian()

    def carre(W):
        w = _directional(model, mp, which, g.gradient(W, stencil))
        return np.sum(w ** 2, axis=1)

    carre_field = ScalarField(f"Gamma^{which}({g.name})", carre,
                              noise_order=g.noise_order + (g.grad is None))
    l_carre = _generator(model, mp, carre_field, Z, stencil, 1.0)

    lg = L_field(model, mp, g, stencil)
    w_g = _directional(model, mp, which, g.gradient(Z, stencil))
    w_lg = _directional(model, mp, which, lg.gradient(Z, stencil))
    return 0.5 * l_carre - np.sum(w_g * w_lg, axis=1)


def _closed_parts(model, mp, f, Z, stencil):
    d = Z.shape[1] // 2
    c = friction_constant(mp.gamma)
    x, _ = _split(Z)
    gx, gv = _split(f.gradient(Z, stencil))
    H = f.hessian(Z, stencil)
    yg = gv
    zg = gx - c * gv
    # d/dv_j of (Yg)_i and (Zg)_i
    dv_y = H[:, d:, d:]
    dv_z = H[:, :d, d:] - c * H[:, d:, d:]
    hess_u_yg = model.hessian_vec(x, yg)
    return c, yg, zg, dv_y, dv_z, hess_u_yg


def gamma2_closed(model, mp, which, f, p, stencil=DEFAULT_STENCIL):
    """Closed forms of the iterated Y and Z forms (mixing constants a = b = 1)."""
    _check_which(which)
    Z, scalar = as_points(model, p)
    c, yg, zg, dv_y, dv_z, hess_u_yg = _closed_parts(model, mp, f, Z, stencil)
    gT = mp.gamma * mp.T
    yz = np.sum(yg * zg, axis=1)
    if which == "Y":
        vals = (gT * np.sum(dv_y ** 2, axis=(1, 2)) - yz
                + (mp.gamma - c) * np.sum(yg ** 2, axis=1))
    else:
        vals = (gT * np.sum(dv_z ** 2, axis=(1, 2)) + c * np.sum(zg ** 2, axis=1)
                + c * (c - mp.gamma) * yz + np.sum(hess_u_yg * zg, axis=1))
    return _out(vals, scalar)


def cross_term_coefficient(gamma):
    """Coefficient of ``Yg.Zg`` in the sum of the two iterated forms."""
    c = friction_constant(gamma)
    return c * c - c * gamma - 1.0


def R_term(model, mp, x, y):
    """``(2/gamma)|y|^2 + |Hess U(x) y|^2 / (2 gamma)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(model.in_domain(x)):
        raise DomainError("position outside the domain")
    hy = model.hessian_vec(x, y)
    return (2.0 / mp.gamma) * np.sum(y ** 2, axis=-1) + np.sum(hy ** 2, axis=-1) / (2.0 * mp.gamma)


@dataclass
class InequalityReport:
    name: str
    field: str
    n_points: int
    min_slack: float
    n_violations: int
    worst_index: int
    tol: float
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.n_violations == 0

    def to_dict(self):
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def check_gamma3_inequality(model, mp, f, points, stencil=DEFAULT_STENCIL, rtol=1e-10):
    """Pointwise slack of the lower bound on the summed iterated forms.

    The left side uses the closed forms; the right side is
    ``gamma T |grad_v Yg|^2 + gamma T |grad_v Zg|^2 + (gamma/2)|Zg|^2 - R(x, Yg)``.
    A point violates when the slack is below ``-rtol`` times the magnitude of
    the terms involved.
    """
    Z, _ = as_points(model, points)
    c, yg, zg, dv_y, dv_z, hess_u_yg = _closed_parts(model, mp, f, Z, stencil)
    gT = mp.gamma * mp.T
    yz = np.sum(yg * zg, axis=1)
    grad_y = gT * np.sum(dv_y ** 2, axis=(1, 2))
    grad_z = gT * np.sum(dv_z ** 2, axis=(1, 2))
    zz = np.sum(zg ** 2, axis=1)
    yy = np.sum(yg ** 2, axis=1)
    cross = np.sum(hess_u_yg * zg, axis=1)
    lhs = (grad_y - yz + (mp.gamma - c) * yy
           + grad_z + c * zz + c * (c - mp.gamma) * yz + cross)
    x, _ = _split(Z)
    rhs = grad_y + grad_z + 0.5 * mp.gamma * zz - R_term(model, mp, x, yg)
    slack = lhs - rhs
    scale = np.abs(lhs) + np.abs(rhs) + np.abs(cross) + np.abs(yz) + 1e-300
    tol = rtol * scale
    bad = slack < -tol
    return InequalityReport(
        name="gamma3", field=f.name, n_points=len(Z),
        min_slack=float(slack.min()), n_violations=int(bad.sum()),
        worst_index=int(np.argmin(slack + tol)), tol=rtol,
    )


# ---------------------------------------------------------------------------
# identity verification over a field library
# ---------------------------------------------------------------------------

@dataclass
class IdentityReport:
    family: str
    field: str
    which: str
    n_points: int
    max_abs_disagreement: float
    max_rel_disagreement: float
    n_failures: int
    rtol: float
    atol: float

    @property
    def passed(self):
        return self.n_failures == 0

    def to_dict(self):
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def verify_gamma2_identity(model, mp, which, f, points, rtol=1e-4, atol=1e-8,
                           stencil=DEFAULT_STENCIL, def_stencil=GAMMA2_STENCIL):
    """Compare the definitional and closed-form iterated forms at ``points``."""
    Z, _ = as_points(model, points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalQualityWarning)
        by_def = gamma2_def(model, mp, which, f, Z, def_stencil, quality_check=False)
    closed = gamma2_closed(model, mp, which, f, Z, stencil)
    diff = np.abs(by_def - closed)
    bad = diff > rtol * np.abs(closed) + atol
    rel = diff / np.maximum(np.abs(closed), atol)
    return IdentityReport(model.family, f.name, which, len(Z), float(diff.max()),
                          float(rel.max()), int(bad.sum()), rtol, atol)


def reports_to_json(reports, metadata=None):
    payload = {"reports": [r.to_dict() for r in reports]}
    if metadata is not None:
        payload["metadata"] = metadata
    return json.dumps(payload, indent=2, default=float)


# ---------------------------------------------------------------------------
# test-field library
# ---------------------------------------------------------------------------

def _ridge(name, phi, dphi, d2phi, a):
    a = np.asarray(a, dtype=float)

    def func(Z):
        return phi(Z @ a)

    def grad(Z):
        return dphi(Z @ a)[:, None] * a

    def hess(Z):
        return d2phi(Z @ a)[:, None, None] * np.outer(a, a)

    return ScalarField(name, func, grad, hess)


def product_field(name, f, g):
    """Product of two analytic fields with product-rule derivatives."""

    def func(Z):
        return f(Z) * g(Z)

    def grad(Z):
        return f.grad(Z) * g(Z)[:, None] + f(Z)[:, None] * g.grad(Z)

    def hess(Z):
        fg, gg = f.grad(Z), g.grad(Z)
        cross = fg[:, :, None] * gg[:, None, :]
        return (f.hess(Z) * g(Z)[:, None, None] + cross + np.swapaxes(cross, 1, 2)
                + f(Z)[:, None, None] * g.hess(Z))

    return ScalarField(name, func, grad, hess)


def linear_field(a, name="linear"):
    a = np.asarray(a, dtype=float)
    return _ridge(name, lambda s: s, np.ones_like, np.zeros_like, a)


def quadratic_field(Q, name="quadratic"):
    Q = np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    return ScalarField(
        name,
        lambda Z: 0.5 * np.einsum("ni,ij,nj->n", Z, Q, Z),
        lambda Z: Z @ Q,
        lambda Z: np.broadcast_to(Q, (len(Z),) + Q.shape).copy(),
    )


def gaussian_field(D, width, name="gaussian"):
    s2 = float(width) ** 2

    def func(Z):
        return np.exp(-0.5 * np.sum(Z ** 2, axis=1) / s2)

    def grad(Z):
        return -Z / s2 * func(Z)[:, None]

    def hess(Z):
        g = func(Z)[:, None, None]
        return (np.einsum("ni,nj->nij", Z, Z) / s2 ** 2 - np.eye(D) / s2) * g

    return ScalarField(name, func, grad, hess)


def constant_field(value=1.0, name="constant"):
    return ScalarField(
        name,
        lambda Z: np.full(len(Z), float(value)),
        lambda Z: np.zeros_like(Z),
        lambda Z: np.zeros((len(Z), Z.shape[1], Z.shape[1])),
    )


def hamiltonian_field(model):
    """``H(x, v) = U(x) + |v|^2 / 2`` with analytic derivatives."""
    d = model.dim

    def func(Z):
        return model.value(Z[:, :d]) + 0.5 * np.sum(Z[:, d:] ** 2, axis=1)

    def grad(Z):
        return np.concatenate([model.gradient(Z[:, :d]), Z[:, d:]], axis=1)

    def hess(Z):
        H = np.zeros((len(Z), 2 * d, 2 * d))
        H[:, :d, :d] = model.hessian(Z[:, :d])
        H[:, d:, d:] = np.eye(d)
        return H

    return ScalarField("H", func, grad, hess)


def coordinate_field(index, D, name=None):
    a = np.zeros(D)
    a[index] = 1.0
    return linear_field(a, name or f"z{index}")


def field_library(d, seed=0):
    """Fixed set of named test fields on phase space of dimension ``2d``.

    Polynomials up to degree three, Gaussian-damped products and
    trigonometric ridges.  Directions are drawn once from ``seed`` so the
    suite is reproducible.
    """
    D = 2 * d
    rng = np.random.default_rng(seed)
    a, b, e = (u / np.linalg.norm(u) for u in rng.standard_normal((3, D)))
    Q = rng.standard_normal((D, D))
    xv = np.zeros((D, D))
    xv[:d, d:] = np.eye(d)
    lin_a = linear_field(a, "lin_a")
    lin_b = linear_field(b, "lin_b")
    damp = gaussian_field(D, 2.0, "damp")
    fields = [
        lin_a,
        quadratic_field(Q, "quad_random"),
        quadratic_field(xv, "x_dot_v"),
        _ridge("cubic_ridge", lambda s: s ** 3 / 6, lambda s: s ** 2 / 2, lambda s: s, a),
        product_field("mixed_cubic", lin_a,
                      _ridge("sq_b", lambda s: s ** 2 / 2, lambda s: s, np.ones_like, b)),
        _ridge("sin_ridge", np.sin, np.cos, lambda s: -np.sin(s), a),
        product_field("cos_sin", _ridge("cos_a", np.cos, lambda s: -np.sin(s),
                                        lambda s: -np.cos(s), a),
                      _ridge("sin_b", np.sin, np.cos, lambda s: -np.sin(s), b)),
        product_field("damped_linear", lin_a, damp),
        product_field("damped_bilinear", product_field("ab", lin_a, lin_b), damp),
        _ridge("exp_ridge", lambda s: np.exp(0.3 * s), lambda s: 0.3 * np.exp(0.3 * s),
               lambda s: 0.09 * np.exp(0.3 * s), e),
        quadratic_field(np.diag(np.r_[np.zeros(d), np.ones(d)]) * 2.0, "v_squared"),
        _ridge("tanh_ridge", np.tanh, lambda s: 1 - np.tanh(s) ** 2,
               lambda s: -2 * np.tanh(s) * (1 - np.tanh(s) ** 2), b),
    ]
    return fields


# ---------------------------------------------------------------------------
# stationarity of the generator under the invariant measure
# ---------------------------------------------------------------------------

def capped_hamiltonian_field(model, cap):
    """``min(H, cap)`` with the derivatives of ``H`` below the cap and zero above."""
    H = hamiltonian_field(model)

    def func(Z):
        return np.minimum(H(Z), cap)

    def grad(Z):
        return np.where((H(Z) < cap)[:, None], H.grad(Z), 0.0)

    def hess(Z):
        return np.where((H(Z) < cap)[:, None, None], H.hess(Z), 0.0)

    return ScalarField(f"min(H,{cap:g})", func, grad, hess)


def stationarity_check(model, mp, fields, samples, n_sigma=3.0, n_batches=20):
    """Sample mean of ``Lf`` over invariant samples should vanish.

    Standard errors come from batch means, which stay valid when the samples
    are mildly correlated (e.g. thinned Markov chain output).
    """
    Z, _ = as_points(model, samples)
    rows = []
    for f in fields:
        lf = _generator(model, mp, f, Z, DEFAULT_STENCIL, 1.0)
        batches = np.array_split(lf, n_batches)
        means = np.array([b.mean() for b in batches])
        se = float(means.std(ddof=1) / math.sqrt(len(means)))
        mean = float(lf.mean())
        rows.append({"field": f.name, "mean": mean, "stderr": se,
                     "passed": bool(abs(mean) <= n_sigma * se)})
    return rows
