"""Grid estimates of (local) Poincare constants.

The weighted Dirichlet form ``int |grad f|^2 w`` is discretised on a
cell-centred tensor grid as ``sum_edges w_mid (f_i - f_j)^2 / h^2`` against
the mass ``sum_nodes w_i f_i^2``.  Edges leaving the masked set are dropped
(no-flux), so the smallest non-zero generalised eigenvalue approximates the
Neumann eigenvalue and ``rho = 1 / lambda_1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from ._validation import check_int, check_positive
from .errors import CapabilityError, NumericsError

DENSE_LIMIT = 4096


class DisconnectedWarning(UserWarning):
    """The masked grid graph has more than one component."""


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred grid: ``n`` cells per axis on ``[lows_j, highs_j]``."""

    lows: tuple
    highs: tuple
    n: tuple

    def __post_init__(self):
        lows = tuple(float(a) for a in np.atleast_1d(self.lows))
        highs = tuple(float(b) for b in np.atleast_1d(self.highs))
        n = np.atleast_1d(self.n)
        if n.size == 1 and len(lows) > 1:
            n = np.repeat(n, len(lows))
        n = tuple(check_int("n", int(k), minimum=2) for k in n)
        if not len(lows) == len(highs) == len(n):
            raise ValueError("lows, highs and n must have equal lengths")
        if any(b <= a for a, b in zip(lows, highs)):
            raise ValueError("each high must exceed the corresponding low")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        object.__setattr__(self, "n", n)

    @property
    def ndim(self):
        return len(self.n)

    @property
    def h(self):
        return np.array([(b - a) / k for a, b, k in zip(self.lows, self.highs, self.n)])

    def axes(self):
        return [a + (np.arange(k) + 0.5) * (b - a) / k
                for a, b, k in zip(self.lows, self.highs, self.n)]

    def nodes(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def refined(self, factor=2):
        return GridSpec(self.lows, self.highs, tuple(k * factor for k in self.n))


@dataclass
class DiscreteForm:
    A: sp.csr_matrix
    mass: np.ndarray
    coords: np.ndarray
    grid: GridSpec
    n_components: int
    n_dropped: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self):
        return len(self.mass)

    def energy(self, f):
        f = np.asarray(f, dtype=float)
        return float(f @ (self.A @ f))

    def weighted_mean(self, f):
        return float(np.dot(self.mass, f) / self.mass.sum())


def assemble_form(log_weight, grid, mask=None, weight_floor=1e-30):
    """Build the stiffness matrix and lumped mass on the masked nodes.

    ``log_weight`` maps ``(n, D)`` coordinates to log-densities; ``mask`` maps
    them to booleans (default: everything).  Nodes whose weight is below
    ``weight_floor`` times the largest node weight are dropped and counted.
    """
    coords = grid.nodes()
    lw = np.asarray(log_weight(coords), dtype=float)
    keep = np.isfinite(lw)
    if mask is not None:
        keep &= np.asarray(mask(coords), dtype=bool)
    if not keep.any():
        raise ValueError("mask leaves no grid nodes")
    top = lw[keep].max()
    n_before = int(keep.sum())
    keep &= lw - top >= math.log(weight_floor)
    n_dropped = n_before - int(keep.sum())
    index = np.full(len(coords), -1)
    index[keep] = np.arange(int(keep.sum()))
    vol = float(np.prod(grid.h))
    mass = np.exp(lw[keep] - top) * vol

    shape = grid.n
    rows, cols, vals = [], [], []
    flat = np.arange(len(coords)).reshape(shape)
    h = grid.h
    for axis in range(grid.ndim):
        lo = np.take(flat, np.arange(shape[axis] - 1), axis=axis).ravel()
        hi = np.take(flat, np.arange(1, shape[axis]), axis=axis).ravel()
        both = keep[lo] & keep[hi]
        lo, hi = lo[both], hi[both]
        mid = 0.5 * (coords[lo] + coords[hi])
        we = np.exp(np.asarray(log_weight(mid), dtype=float) - top) * vol / h[axis] ** 2
        i, j = index[lo], index[hi]
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [we, we, -we, -we]
    n = int(keep.sum())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    n_comp, _ = connected_components(A, directed=False)
    if n_comp > 1:
        warnings.warn(f"masked grid has {n_comp} connected components", DisconnectedWarning,
                      stacklevel=2)
    return DiscreteForm(A, mass, coords[keep], grid, int(n_comp), n_dropped,
                        {"weight_floor": weight_floor, "n_nodes": n})


def rayleigh_quotient(form, f):
    """``form(f) / mass(f - mean)``; an upper bound for ``lambda_1``."""
    f = np.asarray(f, dtype=float)
    g = f - form.weighted_mean(f)
    denom = float(np.dot(form.mass, g * g))
    if denom <= 1e-300 * max(1.0, float(np.dot(form.mass, f * f))):
        raise ValueError("trial function is constant on the grid")
    return form.energy(g) / denom


def smallest_nonzero_eigenvalue(form, tol=1e-8, maxiter=5000, seed=0):
    """Shifted inverse power iteration with constants projected out.

    Returns ``(lambda_1, eigenvector, iterations)``.
    """
    M = form.mass
    # tiny regularising shift on the scale of an average diagonal entry
    shift = 1e-8 * float(form.A.diagonal().sum() / M.sum())
    lu = splu(sp.csc_matrix(form.A + sp.diags(shift * M)))
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(form.size)
    total = M.sum()

    def project(g):
        return g - np.dot(M, g) / total

    f = project(f)
    f /= math.sqrt(np.dot(M, f * f))
    lam_old = math.inf
    for it in range(1, maxiter + 1):
        f = project(lu.solve(M * f))
        f /= math.sqrt(np.dot(M, f * f))
        lam = form.energy(f)
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam, f, it
        lam_old = lam
    raise NumericsError(f"inverse iteration did not converge in {maxiter} steps")


def dense_eigenvalues(form, k=3):
    """Reference solve with a dense symmetric eigensolver (small grids only)."""
    if form.size > DENSE_LIMIT:
        raise CapabilityError(f"dense solve limited to {DENSE_LIMIT} nodes, got {form.size}")
    vals = scipy.linalg.eigh(form.A.toarray(), np.diag(form.mass), eigvals_only=True)
    return vals[:k]


def richardson(values):
    """Successive gaps of a refinement sequence and their ratios."""
    values = np.asarray(values, dtype=float)
    gaps = np.abs(np.diff(values))
    ratios = gaps[:-1] / np.maximum(gaps[1:], 1e-300) if len(gaps) > 1 else np.array([])
    extrapolated = None
    if len(values) >= 2:
        # second-order extrapolation from the two finest grids
        extrapolated = float(values[-1] + (values[-1] - values[-2]) / 3.0)
    return {"values": values.tolist(), "gaps": gaps.tolist(), "ratios": ratios.tolist(),
            "extrapolated": extrapolated}


# ---------------------------------------------------------------------------
# calibration problems
# ---------------------------------------------------------------------------

def calibration_eigenvalue(kind, n, T=1.0, half_width=6.0):
    """``lambda_1`` for a 1-D calibration problem.

    ``kind = "uniform"``: constant weight on ``[0, 1]`` (exact ``pi^2``);
    ``kind = "gaussian"``: ``exp(-q^2 / (2T))`` on ``[-w sqrt(T), w sqrt(T)]``
    (continuum value close to ``1 / T``).
    """
    if kind == "uniform":
        grid = GridSpec((0.0,), (1.0,), (n,))
        form = assemble_form(lambda c: np.zeros(len(c)), grid)
    elif kind == "gaussian":
        T = check_positive("T", T)
        w = half_width * math.sqrt(T)
        grid = GridSpec((-w,), (w,), (n,))
        form = assemble_form(lambda c: -c[:, 0] ** 2 / (2.0 * T), grid, weight_floor=1e-300)
    else:
        raise ValueError(f"unknown calibration problem {kind!r}")
    lam, _, _ = smallest_nonzero_eigenvalue(form)
    return lam


# ---------------------------------------------------------------------------
# local Poincare constant on K
# ---------------------------------------------------------------------------

def _level_set_box(model, level, centre, n_rays=720):
    """Bounding box of ``{U <= level}`` seen along rays from ``centre`` (d <= 2)."""
    d = model.dim
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0.0, 2 * math.pi, n_rays, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    def below(r):
        return model.value(centre + r[:, None] * dirs) <= level

    hi = np.ones(len(dirs))
    while True:
        grow = below(hi)
        if not grow.any():
            break
        hi[grow] *= 2.0
        if hi.max() > 1e12:
            raise CapabilityError("level set of U is not bounded along a ray")
    lo = np.zeros(len(dirs))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        inside = below(mid)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    pts = centre + hi[:, None] * dirs
    lows, highs = pts.min(axis=0), pts.max(axis=0)
    pad = 0.02 * (highs - lows)
    return lows - pad, highs + pad


def _minimiser(model, T):
    from .dynamics import SamplerConfig, sample_positions

    xs, _ = sample_positions(model, T, 2000, SamplerConfig(seed=0, burn_in=500))
    return xs[int(np.argmin(model.value(xs)))]


def local_poincare_estimate(model, mp, R2, velocity_cap=None, n=32, refinements=3,
                            weight_floor=1e-30, tol=1e-8):
    """Estimate ``rho_K`` for ``K = {|v|^2 <= cap} ∩ {U <= R2}`` under ``exp(-H/T)``.

    ``d = 1`` uses a 2-D phase grid.  ``d = 2`` uses the product structure of
    ``K`` and of the measure: ``rho_K`` is the larger of the position and
    velocity constants, each on a 2-D grid.  The grid box is the part of
    ``K`` where the weight exceeds ``weight_floor`` times its maximum.
    Returns ``(rho_K, diagnostics)``; diagnostics carry the eigenvalues at
    each refinement and their Richardson gaps.
    """
    d = model.dim
    T = check_positive("T", mp.T)
    if d > 2:
        raise CapabilityError(
            f"grid Poincare estimates support d <= 2 (phase dimension <= 4), got d = {d}")
    refinements = check_int("refinements", refinements, minimum=1)
    if velocity_cap is None:
        from .certificate import VELOCITY_CAP_FACTOR
        velocity_cap = VELOCITY_CAP_FACTOR * T * d
    budget = -T * math.log(weight_floor)
    x0 = _minimiser(model, T)
    u_min = float(model.value(x0))
    level = min(R2, u_min + budget)
    lows_x, highs_x = _level_set_box(model, level, x0)
    vmax = math.sqrt(min(velocity_cap, 2.0 * budget))
    truncated = {"position": bool(level < R2), "velocity": bool(vmax ** 2 < velocity_cap)}

    def pos_logw(c):
        U = model.value(c)
        return np.where(np.isfinite(U), -(U - u_min) / T, -np.inf)

    def pos_mask(c):
        return model.in_domain(c) & (model.value(c) <= R2)

    problems = []
    if d == 1:
        grid = GridSpec((lows_x[0], -vmax), (highs_x[0], vmax), (n, n))

        def logw(c):
            return pos_logw(c[:, :1]) - c[:, 1] ** 2 / (2.0 * T)

        def mask(c):
            return pos_mask(c[:, :1]) & (c[:, 1] ** 2 <= velocity_cap)

        problems.append(("phase", grid, logw, mask))
    else:
        problems.append(("position", GridSpec(tuple(lows_x), tuple(highs_x), (n, n)),
                         pos_logw, pos_mask))
        problems.append(("velocity", GridSpec((-vmax, -vmax), (vmax, vmax), (n, n)),
                         lambda c: -np.sum(c ** 2, axis=1) / (2.0 * T),
                         lambda c: np.sum(c ** 2, axis=1) <= velocity_cap))

    diag = {"d": d, "weight_floor": weight_floor, "truncated": truncated,
            "level": level, "problems": {}}
    rho = 0.0
    for name, grid, logw, mask in problems:
        lams, sizes, dropped, comps = [], [], [], []
        g = grid
        for _ in range(refinements):
            form = assemble_form(logw, g, mask, weight_floor)
            lam, _, _ = smallest_nonzero_eigenvalue(form, tol=tol)
            lams.append(lam)
            sizes.append(list(g.n))
            dropped.append(form.n_dropped)
            comps.append(form.n_components)
            g = g.refined()
        info = richardson(lams)
        info.update({"grid_sizes": sizes, "n_dropped": dropped, "n_components": comps,
                     "box": [list(grid.lows), list(grid.highs)]})
        diag["problems"][name] = info
        rho = max(rho, 1.0 / lams[-1])
    diag["rho_K"] = rho
    return rho, diag
