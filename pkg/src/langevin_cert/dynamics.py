"""Simulation of the kinetic Langevin SDE, invariant sampling and autocorrelations.

The SDE is ``dx = v dt``, ``dv = -gamma v dt - grad U dt + sqrt(2 gamma T) dB``.
Ensembles are advanced as arrays.  Trajectory ``i`` draws its noise from a
Philox stream keyed by ``(seed, i)``, so results do not depend on the
ensemble size, the block length used for noise draws, or the order in which
members are processed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_phase_points, check_positive, check_vectors
from .errors import DomainError, SetupError, StatisticsError
from .potential import SingularPair, initial_position

SCHEMES = ("BAOAB", "EulerMaruyama")
MAX_DEPTH = 40
EXIT_REASONS = ("none", "energy_cap", "domain_exit")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 1.0
    ensemble_size: int = 1
    seed: int = 0
    # a step of size dt / 2**j is subdivided when |grad U| at its end exceeds
    # substep_force_threshold * 2**j
    substep_force_threshold: float = math.inf
    energy_cap: float = math.inf
    scheme: str = "BAOAB"
    record_stride: int = 1
    block_steps: int = 256

    def __post_init__(self):
        check_positive("dt", self.dt)
        check_positive("t_max", self.t_max, allow_zero=True)
        check_int("ensemble_size", self.ensemble_size, minimum=1)
        check_int("seed", self.seed, minimum=0)
        check_int("record_stride", self.record_stride, minimum=1)
        check_int("block_steps", self.block_steps, minimum=1)
        if not self.substep_force_threshold > 0:
            raise ValueError("substep_force_threshold must be positive")
        if not self.energy_cap > 0:
            raise ValueError("energy_cap must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))


def trajectory_stream(seed, index):
    """Counter-based generator for trajectory ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def substep_stream(seed, index, step):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index, step, 1])))


def ou_factor(gamma, dt):
    return math.exp(-gamma * dt)


def ou_step(v, gamma, T, dt, xi):
    """Exact Ornstein-Uhlenbeck update of the velocity over ``dt``."""
    a = math.exp(-gamma * dt)
    return a * v + math.sqrt(T * (1.0 - a * a)) * xi


def hamiltonian(model, x, v):
    return model.value(x) + 0.5 * np.sum(np.asarray(v) ** 2, axis=-1)


# ---------------------------------------------------------------------------
# single proposals on batches
# ---------------------------------------------------------------------------

def _forces_ok(model, x, threshold):
    """Gradient at ``x`` and a mask of rows in the domain with ``|grad U|`` small."""
    g = np.full_like(x, np.nan)
    inside = model.in_domain(x)
    if inside.any():
        g[inside] = model.gradient(x[inside])
    ok = inside.copy()
    if math.isfinite(threshold):
        ok[inside] &= np.linalg.norm(g[inside], axis=1) <= threshold
    return g, ok


def _propose_langevin(model, mp, scheme, x, v, g, h, xi, threshold):
    if scheme == "BAOAB":
        v1 = v - 0.5 * h * g
        x1 = x + 0.5 * h * v1
        v2 = ou_step(v1, mp.gamma, mp.T, h, xi)
        x2 = x1 + 0.5 * h * v2
        g2, ok = _forces_ok(model, x2, threshold)
        # the half drift must not cross the singular set either
        ok &= model.in_domain(x1)
        v3 = v2 - 0.5 * h * np.where(ok[:, None], g2, 0.0)
        return x2, v3, g2, ok
    x2 = x + h * v
    v2 = v - h * mp.gamma * v - h * g + math.sqrt(2.0 * mp.gamma * mp.T * h) * xi
    g2, ok = _forces_ok(model, x2, threshold)
    return x2, v2, g2, ok


def _propose_gradient(model, T, x, g, h, xi, threshold):
    x2 = x - h * g + math.sqrt(2.0 * T * h) * xi
    g2, ok = _forces_ok(model, x2, threshold)
    return x2, g2, ok


def _subdivide(propose, state, h, rng, depth):
    """Advance one row over ``h`` by recursive halving; ``None`` on failure.

    ``propose`` takes ``(*state, h, xi, level)``; the force threshold is
    relaxed by ``2**level`` so that the impulse ``h |grad U|`` stays bounded.
    """
    d = state[0].shape[1]
    new = propose(*state, h / 2, rng.standard_normal((1, d)), depth)
    if new[-1][0]:
        mid = new[:-1]
    elif depth < MAX_DEPTH:
        mid = _subdivide(propose, state, h / 2, rng, depth + 1)
        if mid is None:
            return None
    else:
        return None
    new = propose(*mid, h / 2, rng.standard_normal((1, d)), depth)
    if new[-1][0]:
        return new[:-1]
    if depth < MAX_DEPTH:
        return _subdivide(propose, mid, h / 2, rng, depth + 1)
    return None


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class Ensemble:
    """Recorded output of an ensemble run.

    ``states`` has shape ``(R, m, D)`` (``D = 2d`` for Langevin, ``d`` for the
    gradient system) and is NaN after a trajectory was frozen.
    ``observables`` maps names to ``(R, m)`` arrays.
    """

    times: np.ndarray
    states: np.ndarray | None
    observables: dict
    exit_reason: np.ndarray
    exit_step: np.ndarray
    n_subdivided: int = 0
    config: dict = field(default_factory=dict)
    phase: bool = True

    @property
    def valid(self):
        return self.exit_reason == "none"

    @property
    def n_invalid(self):
        return int(np.sum(~self.valid))

    def trajectory(self, i):
        return Trajectory(self.times.copy(), self.states[:, i].copy(),
                          bool(self.valid[i]), str(self.exit_reason[i]), self.phase)


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    valid: bool = True
    exit_reason: str = "none"
    phase: bool = True

    def __len__(self):
        return len(self.times)

    def to_csv(self, path):
        """Columns ``t, x_1..x_d, v_1..v_d`` (or ``t, x_1..x_d``)."""
        names = _coordinate_names(self.points.shape[1], phase=self.phase)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + names)
            for t, row in zip(self.times, self.points):
                w.writerow([repr(float(t))] + [repr(float(c)) for c in row])


def _coordinate_names(D, phase=True):
    if phase:
        d = D // 2
        return [f"x_{i + 1}" for i in range(d)] + [f"v_{i + 1}" for i in range(d)]
    return [f"x_{i + 1}" for i in range(D)]


def _run(model, cfg, x, v, propose, observables, store_states, index_offset, energy):
    """Shared time loop; ``v`` is ``None`` for the gradient system."""
    m, d = x.shape
    n_steps = cfg.n_steps
    g, ok = _forces_ok(model, x, math.inf)
    if not ok.all():
        raise DomainError("initial position outside the domain")
    if energy is not None:
        H0 = energy(x, v)
        if np.any(H0 >= cfg.energy_cap):
            raise ValueError("energy_cap must exceed the initial energy")
    gens = [trajectory_stream(cfg.seed, index_offset + i) for i in range(m)]
    n_rec = n_steps // cfg.record_stride + 1
    times = np.arange(n_rec) * cfg.record_stride * cfg.dt
    D = d if v is None else 2 * d
    states = np.full((n_rec, m, D), np.nan) if store_states else None
    obs = {name: np.full((n_rec, m), np.nan) for name in observables}
    exit_reason = np.array(["none"] * m, dtype=object)
    exit_step = np.full(m, -1)
    alive = np.ones(m, dtype=bool)
    n_sub = 0

    def record(r):
        z = x if v is None else np.concatenate([x, v], axis=1)
        if store_states:
            states[r, alive] = z[alive]
        for name, fn in observables.items():
            obs[name][r, alive] = np.asarray(fn(z[alive]), dtype=float)

    record(0)
    block = None
    for step in range(n_steps):
        j = step % cfg.block_steps
        if j == 0:
            length = min(cfg.block_steps, n_steps - step)
            block = np.stack([gen.standard_normal((length, d)) for gen in gens])
        xi = block[:, j, :]
        idx = np.flatnonzero(alive)
        if idx.size:
            state = (x[idx], g[idx]) if v is None else (x[idx], v[idx], g[idx])
            out = propose(*state, cfg.dt, xi[idx], 0)
            good = out[-1]
            xn, gn = out[0], out[-2]
            vn = None if v is None else out[1]
            for pos in np.flatnonzero(~good):
                i = idx[pos]
                n_sub += 1
                rng = substep_stream(cfg.seed, index_offset + i, step)
                row = (x[i:i + 1], g[i:i + 1]) if v is None else (x[i:i + 1], v[i:i + 1], g[i:i + 1])
                res = _subdivide(propose, row, cfg.dt, rng, 1)
                if res is None:
                    alive[i] = False
                    exit_reason[i] = "domain_exit"
                    exit_step[i] = step
                    continue
                xn[pos], gn[pos] = res[0][0], res[-1][0]
                if v is not None:
                    vn[pos] = res[1][0]
            keep = alive[idx]
            x[idx[keep]] = xn[keep]
            g[idx[keep]] = gn[keep]
            if v is not None:
                v[idx[keep]] = vn[keep]
            if energy is not None and math.isfinite(cfg.energy_cap):
                live = idx[keep]
                over = energy(x[live], None if v is None else v[live]) > cfg.energy_cap
                for i in live[over]:
                    alive[i] = False
                    exit_reason[i] = "energy_cap"
                    exit_step[i] = step
        if (step + 1) % cfg.record_stride == 0:
            record((step + 1) // cfg.record_stride)
    return Ensemble(times, states, obs, exit_reason.astype(str), exit_step, n_sub,
                    config=cfg.__dict__.copy(), phase=v is not None)


def simulate_ensemble(model, mp, cfg, Z0, observables=None, store_states=True,
                      index_offset=0):
    """Advance the rows of ``Z0`` (shape ``(m, 2d)``) over ``[0, t_max]``.

    ``observables`` maps names to functions of ``(n, 2d)`` phase rows, recorded
    at every ``record_stride``-th step.  Trajectory ``i`` uses the stream
    ``(seed, index_offset + i)``.
    """
    Z0 = check_phase_points(Z0, model.dim, name="Z0")
    d = model.dim
    x = Z0[:, :d].copy()
    v = Z0[:, d:].copy()

    def propose(x, v, g, h, xi, level):
        return _propose_langevin(model, mp, cfg.scheme, x, v, g, h, xi,
                                 cfg.substep_force_threshold * 2.0 ** level)

    return _run(model, cfg, x, v, propose, observables or {}, store_states,
                index_offset, lambda x, v: hamiltonian(model, x, v))


def simulate_trajectory(model, mp, cfg, p0, index=0):
    """Single trajectory; identical to member ``index`` of an ensemble run."""
    z0 = p0.z if hasattr(p0, "z") else np.asarray(p0, dtype=float)
    ens = simulate_ensemble(model, mp, cfg, z0[None, :], index_offset=index)
    return ens.trajectory(0)


def step(model, mp, cfg, p, rng):
    """One step of size ``cfg.dt`` from the phase point ``p`` using ``rng``."""
    z = p.z if hasattr(p, "z") else np.asarray(p, dtype=float)
    z = check_vectors(z, 2 * model.dim, name="p")
    d = model.dim
    x, v = z[None, :d].copy(), z[None, d:].copy()
    g, ok = _forces_ok(model, x, math.inf)
    if not ok[0]:
        raise DomainError("phase point outside the state space")

    def propose(x, v, g, h, xi, level):
        return _propose_langevin(model, mp, cfg.scheme, x, v, g, h, xi,
                                 cfg.substep_force_threshold * 2.0 ** level)

    out = propose(x, v, g, cfg.dt, rng.standard_normal((1, d)), 0)
    if not out[-1][0]:
        out = _subdivide(propose, (x, v, g), cfg.dt, rng, 1)
        if out is None:
            raise DomainError("step could not be completed inside the domain")
    return np.concatenate([out[0][0], out[1][0]])


def simulate_gradient_system(model, T, cfg, X0, observables=None, store_states=True,
                             index_offset=0):
    """Euler-Maruyama for ``dX = -grad U dt + sqrt(2T) dW`` with the same substepping."""
    T = check_positive("T", T, allow_zero=True)
    X0 = np.atleast_2d(check_vectors(X0, model.dim, name="X0")).copy()

    def propose(x, g, h, xi, level):
        return _propose_gradient(model, T, x, g, h, xi,
                                 cfg.substep_force_threshold * 2.0 ** level)

    return _run(model, cfg, X0, None, propose, observables or {}, store_states,
                index_offset, lambda x, v: model.value(x))


# ---------------------------------------------------------------------------
# invariant measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    n_chains: int = 64
    burn_in: int = 2000
    thin: int = 10
    step_size: float | None = None
    target_acceptance: float = 0.3

    def __post_init__(self):
        check_int("seed", self.seed, minimum=0)
        check_int("n_chains", self.n_chains, minimum=1)
        check_int("burn_in", self.burn_in, minimum=0)
        check_int("thin", self.thin, minimum=1)
        if self.step_size is not None:
            check_positive("step_size", self.step_size)


def acceptance_probability(dU, T):
    """Metropolis rule ``min(1, exp(-dU / T))``."""
    dU = np.asarray(dU, dtype=float)
    with np.errstate(over="ignore"):
        return np.minimum(1.0, np.exp(-dU / T))


def _starting_points(model, n_chains, rng):
    try:
        x0 = initial_position(model)
    except DomainError as exc:
        raise SetupError(str(exc)) from exc
    scale = 0.05 if isinstance(model, SingularPair) else 0.5
    xs = np.empty((n_chains, model.dim))
    for c in range(n_chains):
        for _ in range(1000):
            trial = x0 + scale * rng.standard_normal(model.dim)
            if model.in_domain(trial):
                xs[c] = trial
                break
        else:
            raise SetupError("no starting point found in the domain")
    return xs


def sample_positions(model, T, n, cfg=SamplerConfig()):
    """Random-walk Metropolis for ``exp(-U/T)`` restricted to the domain.

    Chains run side by side; the step size adapts during burn-in only.
    Returns ``(positions, info)``.
    """
    n = check_int("n", n, minimum=1)
    T = check_positive("T", T)
    root = np.random.SeedSequence(cfg.seed)
    rng = np.random.Generator(np.random.Philox(root.spawn(1)[0]))
    m = min(cfg.n_chains, n)
    x = _starting_points(model, m, rng)
    U = model.value(x)
    step_size = cfg.step_size or 2.4 * math.sqrt(T / model.dim) / (2.0 if isinstance(model, SingularPair) else 1.0)
    per_chain = -(-n // m)
    total = cfg.burn_in + per_chain * cfg.thin
    out = np.empty((per_chain, m, model.dim))
    accepted = 0
    window = 0
    window_acc = 0
    for it in range(total):
        prop = x + step_size * rng.standard_normal(x.shape)
        Up = model.value(prop)
        log_u = np.log(rng.random(m))
        with np.errstate(invalid="ignore"):
            acc = np.isfinite(Up) & (log_u < -(Up - U) / T)
        x[acc] = prop[acc]
        U[acc] = Up[acc]
        if it < cfg.burn_in:
            window += m
            window_acc += int(acc.sum())
            if (it + 1) % 50 == 0:
                rate = window_acc / window
                step_size *= math.exp(rate - cfg.target_acceptance)
                window = window_acc = 0
        else:
            accepted += int(acc.sum())
            k = it - cfg.burn_in
            if (k + 1) % cfg.thin == 0:
                out[k // cfg.thin] = x
    samples = out.reshape(-1, model.dim)[:n]
    info = {"step_size": step_size,
            "acceptance": accepted / max(1, (total - cfg.burn_in) * m),
            "n_chains": m}
    return samples, info


def sample_invariant(model, mp, n, cfg=SamplerConfig(), return_info=False):
    """``n`` phase points from ``exp(-H/T)``: Metropolis positions, exact Gaussian velocities."""
    xs, info = sample_positions(model, mp.T, n, cfg)
    root = np.random.SeedSequence(cfg.seed)
    vel_rng = np.random.Generator(np.random.Philox(root.spawn(2)[1]))
    vs = math.sqrt(mp.T) * vel_rng.standard_normal(xs.shape)
    Z = np.concatenate([xs, vs], axis=1)
    return (Z, info) if return_info else Z


# ---------------------------------------------------------------------------
# autocorrelation
# ---------------------------------------------------------------------------

@dataclass
class Autocorrelation:
    t: np.ndarray
    C: np.ndarray
    stderr: np.ndarray
    n_used: int

    def rows(self):
        return list(zip(self.t.tolist(), self.C.tolist(), self.stderr.tolist()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "C", "stderr"])
            for row in self.rows():
                w.writerow([repr(float(c)) for c in row])


def _batch_se(values, n_batches):
    batches = np.array_split(values, n_batches, axis=0)
    means = np.array([b.mean(axis=0) for b in batches])
    return means.std(axis=0, ddof=1) / math.sqrt(len(batches))


def autocorrelation(times, obs, valid=None, n_batches=50):
    """Stationary autocovariance from an ensemble started at equilibrium.

    ``obs`` has shape ``(R, m)``: the observable along ``m`` independent
    trajectories.  ``C(t_r)`` is the unbiased sample covariance of ``f(0)`` and
    ``f(t_r)`` across trajectories, with batch-mean standard errors over
    groups of trajectories.
    """
    obs = np.asarray(obs, dtype=float)
    if valid is not None:
        obs = obs[:, np.asarray(valid, dtype=bool)]
    m = obs.shape[1]
    if m < 2 * max(2, n_batches) or obs.shape[0] < 1:
        raise StatisticsError(f"need at least {2 * max(2, n_batches)} trajectories, got {m}")
    centred = obs - obs.mean(axis=1, keepdims=True)
    products = centred[0][None, :] * centred * (m / (m - 1.0))
    C = products.mean(axis=1)
    se = _batch_se(products.T, n_batches)
    return Autocorrelation(np.asarray(times, dtype=float), C, se, m)


def autocorrelation_series(series, dt, max_lag, n_batches=20):
    """Autocovariance of one long stationary series, batch-mean errors over time blocks."""
    x = np.asarray(series, dtype=float)
    max_lag = check_int("max_lag", max_lag, minimum=0)
    n = len(x)
    if n < n_batches * (max_lag + 2):
        raise StatisticsError("series too short for the requested lags and batches")
    xc = x - x.mean()
    base = xc[: n - max_lag]
    prods = np.stack([base * xc[k: n - max_lag + k] for k in range(max_lag + 1)], axis=1)
    C = prods.mean(axis=0)
    se = _batch_se(prods, n_batches)
    return Autocorrelation(np.arange(max_lag + 1) * dt, C, se, n)


def ou_position_autocovariance(t, gamma=2.0):
    """Stationary ``E[x(0) x(t)]`` for ``U = x^2/2``, ``T = 1``, ``d = 1``.

    Computed from the matrix exponential of the drift ``[[0, 1], [-1, -gamma]]``
    (stationary covariance is the identity).
    """
    from scipy.linalg import expm

    A = np.array([[0.0, 1.0], [-1.0, -gamma]])
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([expm(A * s)[0, 0] for s in t]), np.array([expm(A * s)[1, 1] for s in t])


def moment_stationarity(times, obs, valid=None, n_sigma=3.0, n_batches=50):
    """Check that the ensemble mean of an observable is flat in time.

    Each recorded mean is compared with the time-0 mean; the standard error
    of the difference comes from batch means over trajectories.
    """
    obs = np.asarray(obs, dtype=float)
    if valid is not None:
        obs = obs[:, np.asarray(valid, dtype=bool)]
    diff = obs - obs[0][None, :]
    mean = diff.mean(axis=1)
    se = _batch_se(diff.T, n_batches)
    se[0] = 0.0
    bad = np.abs(mean) > n_sigma * se
    bad[0] = False
    return {"n_times": len(times), "n_failures": int(bad.sum()),
            "max_z": float(np.max(np.abs(mean[1:]) / np.maximum(se[1:], 1e-300))) if len(times) > 1 else 0.0}
