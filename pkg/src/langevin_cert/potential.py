"""Potential families and pointwise checkers for their growth bounds.

Positions are flat vectors of length ``d = N * k`` (particle ``i`` occupies
entries ``i*k .. i*k + k - 1``).  Every evaluation routine accepts a single
position of shape ``(d,)`` or a batch of shape ``(n, d)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_int, check_positive, check_vectors
from .errors import DomainError

# pair separations below this are treated as coincident
SINGULARITY_GUARD = 1e-12

FAMILIES = ("SingleWell", "DoubleWell", "SingularPair")


@dataclass(frozen=True)
class PhasePoint:
    """A position/velocity pair on the state space."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        v = np.asarray(self.v, dtype=float).ravel()
        if x.shape != v.shape:
            raise ValueError(f"x and v lengths differ: {x.size} != {v.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def z(self):
        return np.concatenate([self.x, self.v])

    @classmethod
    def from_z(cls, z):
        z = np.asarray(z, dtype=float).ravel()
        d = z.size // 2
        return cls(z[:d], z[d:])

    def is_valid(self, model):
        return bool(model.in_domain(self.x))


@dataclass(frozen=True)
class GrowthConstants:
    """Constants of the two growth bounds on the potential.

    ``kappa2`` bounds the Hessian relative to the squared gradient, the
    remaining fields bracket ``|grad U|^2`` between powers of ``U``.
    """

    kappa2: float
    c0: float
    d0: float
    c_inf: float
    d_inf: float
    eta0: float
    eta_inf: float

    def __post_init__(self):
        check_positive("kappa2", self.kappa2, allow_zero=True)
        for name in ("c0", "d0", "c_inf", "d_inf"):
            check_positive(name, getattr(self, name))
        if not (self.eta0 < -1 or self.eta0 > 0):
            raise ValueError(f"eta0 must lie in (-inf,-1) U (0,inf), got {self.eta0}")
        if not self.eta_inf > 1:
            raise ValueError(f"eta_inf must exceed 1, got {self.eta_inf}")

    def to_dict(self):
        return asdict(self)


class Potential:
    """Common interface of the potential families.

    Subclasses implement ``_value``, ``_gradient`` and ``_hessian_vec`` on
    batches already known to lie in the domain.
    """

    family = None

    def __init__(self, N=1, k=1):
        self.N = check_int("N", N, minimum=1)
        self.k = check_int("k", k, minimum=1)

    @property
    def dim(self):
        return self.N * self.k

    def __repr__(self):
        params = ", ".join(f"{key}={val!r}" for key, val in self.params().items())
        return f"{type(self).__name__}({params})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))

    def params(self):
        return {"N": self.N, "k": self.k}

    # ------------------------------------------------------------------ API
    def in_domain(self, x):
        x = check_vectors(x, self.dim)
        return np.ones(x.shape[:-1], dtype=bool)

    def value(self, x):
        """Potential energy; ``+inf`` outside the domain."""
        x = check_vectors(x, self.dim)
        inside = self.in_domain(x)
        out = np.full(x.shape[:-1], np.inf)
        if np.ndim(inside) == 0:
            return float(self._value(x)) if inside else math.inf
        if inside.any():
            out[inside] = self._value(x[inside])
        return out

    def gradient(self, x):
        x = self._require_domain(x)
        return self._gradient(x)

    def hessian_vec(self, x, y):
        x = self._require_domain(x)
        y = check_vectors(y, self.dim, name="y")
        x, y = np.broadcast_arrays(x, y)
        return self._hessian_vec(x, y)

    def hessian(self, x):
        """Dense Hessian assembled column by column from ``hessian_vec``."""
        x = self._require_domain(x)
        eye = np.eye(self.dim)
        cols = [self._hessian_vec(x, np.broadcast_to(e, x.shape)) for e in eye]
        return np.stack(cols, axis=-1)

    def to_config(self):
        return {"family": self.family, **self.params()}

    # -------------------------------------------------------------- helpers
    def _require_domain(self, x):
        x = check_vectors(x, self.dim)
        inside = self.in_domain(x)
        if not np.all(inside):
            raise DomainError(f"{self.family}: position outside the domain")
        return x


class SingleWell(Potential):
    """``U(x) = |x|^2 / 2``."""

    family = "SingleWell"

    def _value(self, x):
        return 0.5 * np.sum(x * x, axis=-1)

    def _gradient(self, x):
        return np.array(x, dtype=float, copy=True)

    def _hessian_vec(self, x, y):
        return np.array(y, dtype=float, copy=True)


class DoubleWell(Potential):
    """``U(x) = (|x|^2 - 1)^2 / 4``."""

    family = "DoubleWell"

    def _value(self, x):
        s = np.sum(x * x, axis=-1)
        return 0.25 * (s - 1.0) ** 2

    def _gradient(self, x):
        s = np.sum(x * x, axis=-1, keepdims=True)
        return (s - 1.0) * x

    def _hessian_vec(self, x, y):
        s = np.sum(x * x, axis=-1, keepdims=True)
        xy = np.sum(x * y, axis=-1, keepdims=True)
        return (s - 1.0) * y + 2.0 * xy * x


class SingularPair(Potential):
    """Confining well plus singular pair repulsion.

    ``U(x) = sum_i A |x_i|^a + sum_{i<j} B |x_i - x_j|^{-b}``.  With ``k = 1``
    the particles must stay ordered, ``x_1 < x_2 < ... < x_N``; any other
    configuration has infinite energy.
    """

    family = "SingularPair"

    def __init__(self, N=2, k=1, A=1.0, B=1.0, a=2, b=6.0, ordered=None):
        super().__init__(N, k)
        self.A = check_positive("A", A)
        self.B = check_positive("B", B)
        self.b = check_positive("b", b)
        if isinstance(a, bool) or float(a) != int(a) or int(a) < 2 or int(a) % 2:
            raise ValueError(f"a must be an even integer >= 2, got {a}")
        self.a = int(a)
        if ordered is None:
            ordered = self.k == 1
        if self.k == 1 and not ordered and self.N > 1:
            raise ValueError("k = 1 requires the ordering constraint")
        self.ordered = bool(ordered)

    def params(self):
        return {
            "N": self.N, "k": self.k, "A": self.A, "B": self.B,
            "a": self.a, "b": self.b, "ordered": self.ordered,
        }

    def _split(self, x):
        return x.reshape(x.shape[:-1] + (self.N, self.k))

    def _pairs(self, x):
        """Return separation vectors ``r_ij = x_i - x_j`` and distances."""
        p = self._split(x)
        r = p[..., :, None, :] - p[..., None, :, :]
        dist = np.sqrt(np.sum(r * r, axis=-1))
        return p, r, dist

    def in_domain(self, x):
        x = check_vectors(x, self.dim)
        if self.N == 1:
            return np.ones(x.shape[:-1], dtype=bool)
        _, _, dist = self._pairs(x)
        iu = np.triu_indices(self.N, 1)
        ok = np.all(dist[..., iu[0], iu[1]] >= SINGULARITY_GUARD, axis=-1)
        if self.ordered and self.k == 1:
            ok &= np.all(np.diff(x, axis=-1) > 0, axis=-1)
        return ok

    def _value(self, x):
        p, _, dist = self._pairs(x)
        well = self.A * np.sum(np.sum(p * p, axis=-1) ** (self.a / 2), axis=-1)
        if self.N == 1:
            return well
        iu = np.triu_indices(self.N, 1)
        pair = self.B * np.sum(dist[..., iu[0], iu[1]] ** (-self.b), axis=-1)
        return well + pair

    def _inv_powers(self, dist, power):
        """``dist ** -power`` with the diagonal set to zero."""
        eye = np.eye(self.N, dtype=bool)
        safe = np.where(eye, 1.0, dist)
        return np.where(eye, 0.0, safe ** (-power))

    def _gradient(self, x):
        p, r, dist = self._pairs(x)
        norm2 = np.sum(p * p, axis=-1, keepdims=True)
        g = self.A * self.a * p * norm2 ** ((self.a - 2) / 2)
        if self.N > 1:
            inv = self._inv_powers(dist, self.b + 2)
            g = g - self.B * self.b * np.sum(r * inv[..., None], axis=-2)
        return g.reshape(x.shape)

    def _hessian_vec(self, x, y):
        p, r, dist = self._pairs(x)
        yp = self._split(y)
        norm2 = np.sum(p * p, axis=-1, keepdims=True)
        out = self.A * self.a * norm2 ** ((self.a - 2) / 2) * yp
        if self.a > 2:
            py = np.sum(p * yp, axis=-1, keepdims=True)
            out = out + self.A * self.a * (self.a - 2) * norm2 ** ((self.a - 4) / 2) * py * p
        if self.N > 1:
            w = yp[..., :, None, :] - yp[..., None, :, :]
            inv = self._inv_powers(dist, self.b + 2)[..., None]
            inv4 = self._inv_powers(dist, self.b + 4)[..., None]
            rw = np.sum(r * w, axis=-1, keepdims=True)
            hw = -self.B * self.b * (inv * w - (self.b + 2) * inv4 * rw * r)
            out = out + np.sum(hw, axis=-2)
        return out.reshape(x.shape)


def make_potential(family, **params):
    """Build a potential from a family name and its parameters."""
    classes = {"SingleWell": SingleWell, "DoubleWell": DoubleWell,
               "SingularPair": SingularPair}
    if family not in classes:
        raise ValueError(f"unknown potential family {family!r}; expected one of {FAMILIES}")
    cls = classes[family]
    if cls is not SingularPair:
        params = {key: val for key, val in params.items() if key in ("N", "k")}
    return cls(**params)


def potential_from_config(table):
    """Inverse of :meth:`Potential.to_config` (values may be strings)."""
    table = dict(table)
    family = table.pop("family")
    conv = {"N": int, "k": int, "a": int, "A": float, "B": float, "b": float}
    params = {}
    for key, val in table.items():
        if key == "ordered":
            params[key] = val if isinstance(val, bool) else str(val).lower() in ("1", "true", "yes")
        elif key in conv:
            params[key] = conv[key](float(val)) if conv[key] is int else conv[key](val)
    return make_potential(family, **params)


# ---------------------------------------------------------------------------
# pointwise checkers
# ---------------------------------------------------------------------------

@dataclass
class BoundReport:
    """Outcome of a pointwise inequality sweep."""

    name: str
    n_checked: int
    n_violations: int
    max_violation: float
    worst_index: int | None
    n_skipped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.n_violations == 0

    def to_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _violations(lhs, rhs, rtol=1e-10, atol=1e-12):
    """``lhs <= rhs`` up to rounding; returns the raw excess and a mask."""
    excess = lhs - rhs
    bad = excess > rtol * np.maximum(np.abs(lhs), np.abs(rhs)) + atol
    return excess, bad


def _summarise(name, excess, bad, n_skipped=0, extra=None, index=None):
    n = excess.size
    if n == 0:
        return BoundReport(name, 0, 0, -math.inf, None, n_skipped, extra or {})
    worst = int(np.argmax(excess))
    return BoundReport(
        name=name, n_checked=int(n), n_violations=int(np.count_nonzero(bad)),
        max_violation=float(excess[worst]),
        worst_index=int(index[worst]) if index is not None else worst,
        n_skipped=n_skipped, extra=extra or {},
    )


def _drop_outside(model, xs, name):
    xs = np.atleast_2d(check_vectors(xs, model.dim))
    inside = model.in_domain(xs)
    n_out = int(np.count_nonzero(~inside))
    if n_out:
        warnings.warn(f"{name}: skipped {n_out} samples outside the domain", stacklevel=3)
    return xs, inside, n_out


def check_growth_bound_1(model, gc, T, d, xs, ys):
    """Hessian bound ``|D2U y| <= |grad U|^2 |y| / (16 T d) + kappa2 |y|``.

    Also records the largest ratio ``|D2U y| / |grad U|^2`` over the top
    decile of sampled energies, a diagnostic for how far the threshold
    ``1/(16 T d)`` is from being tight at infinity.
    """
    xs, inside, n_out = _drop_outside(model, xs, "growth bound 1")
    ys = np.atleast_2d(check_vectors(ys, model.dim, name="ys"))
    ys = np.broadcast_to(ys, xs.shape)[inside]
    idx = np.flatnonzero(inside)
    x = xs[inside]
    g = model.gradient(x)
    g2 = np.sum(g * g, axis=-1)
    hy = np.linalg.norm(model.hessian_vec(x, ys), axis=-1)
    ynorm = np.linalg.norm(ys, axis=-1)
    rhs = g2 * ynorm / (16.0 * T * d) + gc.kappa2 * ynorm
    excess, bad = _violations(hy, rhs)
    extra = {}
    if x.shape[0]:
        u = model.value(x)
        top = u >= np.quantile(u, 0.9)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = hy[top] / (g2[top] * np.maximum(ynorm[top], 1e-300))
        ratio = ratio[np.isfinite(ratio)]
        extra["max_hessian_gradient_ratio_top_decile"] = float(ratio.max()) if ratio.size else None
        extra["threshold"] = 1.0 / (16.0 * T * d)
    return _summarise("growth_bound_1", excess, bad, n_out, extra, idx)


def check_growth_bound_2(model, gc, xs):
    """Two-sided bracket of ``|grad U|^2`` by powers of ``U``.

    The report's ``max_violation`` is the worse of the two sides; the
    per-side worst slacks are in ``extra``.
    """
    xs, inside, n_out = _drop_outside(model, xs, "growth bound 2")
    idx = np.flatnonzero(inside)
    x = xs[inside]
    u = model.value(x)
    g = model.gradient(x)
    g2 = np.sum(g * g, axis=-1)
    lower = gc.c_inf * u ** (2.0 - 2.0 / gc.eta_inf) - gc.d_inf
    upper = gc.c0 * u ** (2.0 + 2.0 / gc.eta0) + gc.d0
    ex_lo, bad_lo = _violations(lower, g2)
    ex_hi, bad_hi = _violations(g2, upper)
    excess = np.maximum(ex_lo, ex_hi)
    bad = bad_lo | bad_hi
    extra = {
        "lower_side_min_slack": float(-ex_lo.max()) if ex_lo.size else None,
        "upper_side_min_slack": float(-ex_hi.max()) if ex_hi.size else None,
        "lower_side_violations": int(bad_lo.sum()),
        "upper_side_violations": int(bad_hi.sum()),
    }
    return _summarise("growth_bound_2", excess, bad, n_out, extra, idx)


def _require_singular(model):
    if not isinstance(model, SingularPair):
        raise ValueError(f"bound is specific to SingularPair, got {model.family}")


def singular_gradient_lower_bound(model, x):
    """Explicit lower bound on ``|grad U|`` for the singular pair family."""
    _require_singular(model)
    x = model._require_domain(x)
    A, B, a, b, N = model.A, model.B, model.a, model.b, model.N
    p, _, dist = model._pairs(x)
    norms = np.sqrt(np.sum(p * p, axis=-1))
    well = A * a / (2.0 * N ** 1.5) * np.sum(norms ** (a - 1), axis=-1)
    inter = 0.0
    if N > 1:
        iu = np.triu_indices(N, 1)
        inter = B * b / (2.0 * N ** 3.5) * np.sum(dist[..., iu[0], iu[1]] ** (-b - 1), axis=-1)
    return well + inter - A * a / math.sqrt(N) - B * b * N ** (b + 2.5)


def singular_hessian_upper_bound(model, x):
    """Explicit bound on the operator norm of the Hessian (singular family)."""
    _require_singular(model)
    x = model._require_domain(x)
    A, B, a, b, N, k = model.A, model.B, model.a, model.b, model.N, model.k
    p, _, dist = model._pairs(x)
    norm2 = np.sum(p * p, axis=-1)
    out = A * a * (a - 1) * k * np.sum(norm2 ** ((a - 2) / 2), axis=-1)
    if N > 1:
        iu = np.triu_indices(N, 1)
        out = out + 4.0 * B * b * (b + 3) * k * np.sum(dist[..., iu[0], iu[1]] ** (-b - 2), axis=-1)
    return out


def check_singular_bounds(model, xs, ys=None, rng=None):
    """Sweep the gradient lower bound and the Hessian upper bound.

    ``ys`` are directions for the Hessian check; random unit vectors are drawn
    when omitted.
    """
    _require_singular(model)
    xs, inside, n_out = _drop_outside(model, xs, "singular bounds")
    idx = np.flatnonzero(inside)
    x = xs[inside]
    if ys is None:
        rng = np.random.default_rng(rng)
        ys = rng.standard_normal(x.shape)
    else:
        ys = np.broadcast_to(np.atleast_2d(ys), xs.shape)[inside]
    ys = ys / np.linalg.norm(ys, axis=-1, keepdims=True)
    gnorm = np.linalg.norm(model.gradient(x), axis=-1)
    lower = singular_gradient_lower_bound(model, x)
    ex_g, bad_g = _violations(lower, gnorm)
    hy = np.linalg.norm(model.hessian_vec(x, ys), axis=-1)
    upper = singular_hessian_upper_bound(model, x)
    ex_h, bad_h = _violations(hy, upper)
    return (_summarise("gradient_lower_bound", ex_g, bad_g, n_out, index=idx),
            _summarise("hessian_upper_bound", ex_h, bad_h, n_out, index=idx))


def stress_positions(model, n, rng=None, typical_separation=1.0, far_scale=10.0):
    """Deterministic-given-``rng`` positions near the singular set and far out.

    Half the points push one pair of particles together (separations down to
    ``0.05 * typical_separation``); the other half scale a random
    configuration outwards up to ``far_scale`` times its size.  For families
    without a singular set every point is a far-field point.
    """
    rng = np.random.default_rng(rng)
    N, k = model.N, model.k
    out = []
    n_near = n // 2 if (isinstance(model, SingularPair) and N > 1) else 0
    base_spacing = typical_separation
    for j in range(n_near):
        p = _ordered_lattice(N, k, base_spacing) + 0.1 * base_spacing * rng.standard_normal((N, k))
        if k == 1:
            p = np.sort(p, axis=0)
            i = int(rng.integers(0, N - 1))
            m = i + 1
        else:
            i, m = rng.choice(N, size=2, replace=False)
        sep = typical_separation * 10.0 ** rng.uniform(math.log10(0.05), 0.0)
        direction = rng.standard_normal(k)
        direction /= np.linalg.norm(direction)
        if k == 1:
            direction = np.abs(direction)
        centre = 0.5 * (p[i] + p[m])
        p[i] = centre - 0.5 * sep * direction
        p[m] = centre + 0.5 * sep * direction
        if k == 1:
            # keep the remaining particles ordered around the squeezed pair
            for q in range(m + 1, N):
                p[q] = max(p[q, 0], p[q - 1, 0] + sep)
            for q in range(i - 1, -1, -1):
                p[q] = min(p[q, 0], p[q + 1, 0] - sep)
        out.append(p.ravel())
    for j in range(n - n_near):
        p = _ordered_lattice(N, k, base_spacing) + 0.2 * base_spacing * rng.standard_normal((N, k))
        if k == 1:
            p = np.sort(p, axis=0)
        scale = 10.0 ** rng.uniform(0.0, math.log10(far_scale))
        shift = rng.standard_normal(k) * scale
        out.append((p * scale + shift).ravel())
    xs = np.array(out).reshape(n, model.dim)
    return xs[model.in_domain(xs)]


def _ordered_lattice(N, k, spacing):
    """N points spaced along the first axis, centred at the origin."""
    p = np.zeros((N, k))
    p[:, 0] = (np.arange(N) - (N - 1) / 2.0) * spacing
    return p


def initial_position(model, spacing=1.0):
    """A valid starting configuration (ordered lattice, or the origin)."""
    if isinstance(model, SingularPair):
        x = _ordered_lattice(model.N, model.k, spacing).ravel()
    elif isinstance(model, DoubleWell):
        x = np.zeros(model.dim)
        x[0] = 1.0
    else:
        x = np.zeros(model.dim)
    if not model.in_domain(x):
        raise DomainError("could not construct an initial position in the domain")
    return x
