"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every stochastic test uses a fixed seed.  Thresholds are the stated ones.
"""
import math

import numpy as np
import pytest

import oracle_mp
from langevin_cert import DoubleWell, ModelParams, SingleWell, SingularPair
from langevin_cert.certificate import (build_certificate, growth_constants_for,
                                       growth_constants_singular, villani_certificate)
from langevin_cert.dynamics import (SamplerConfig, SimConfig, autocorrelation, hamiltonian,
                                    ou_factor, ou_step, sample_invariant, sample_positions,
                                    simulate_ensemble)
from langevin_cert.gamma import cross_term_coefficient, field_library, verify_gamma2_identity
from langevin_cert.harness import (MU_KC_BOUND, WindowPolicy, compare_certificate,
                                   estimate_decay_rate, mu_tail_checks)
from langevin_cert.lyapunov import LyapunovWeight, drift_check, stress_grid
from langevin_cert.potential import (check_growth_bound_1, check_growth_bound_2,
                                     check_singular_bounds, stress_positions)
from langevin_cert.spectral import calibration_eigenvalue, richardson

pytestmark = pytest.mark.acceptance


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def rel(a, b):
    return abs(float(a) - float(b)) / abs(float(b))


def test_criterion_1_gamma2_identities(capsys):
    bad = []
    n_checks = 0
    for model in (SingleWell(), DoubleWell(N=2), SingularPair(N=2, k=1)):
        mp = ModelParams(2.0, 1.0, N=model.N, k=model.k)
        Z = sample_invariant(model, mp, 100, SamplerConfig(seed=1))
        for f in field_library(model.dim, seed=1):
            for which in ("Y", "Z"):
                rep = verify_gamma2_identity(model, mp, which, f, Z, rtol=1e-4)
                n_checks += rep.n_points
                if not rep.passed:
                    bad.append((repr(model), f.name, which, rep.max_rel_disagreement))
    gammas = np.random.default_rng(2).uniform(0.01, 5.0, 100)
    cross = max(abs(cross_term_coefficient(g)) for g in gammas)
    ok = not bad and cross <= 1e-14
    verdict(capsys, 1, ok, f"{n_checks} point checks, failures={bad[:3]}, max |c^2-gc-1|={cross:.2e}")


def test_criterion_2_villani_single_well(capsys):
    vc = villani_certificate(ModelParams(2.0, 1.0), rho=1.0, M=1.0)
    ref = oracle_mp.villani(2, 1, 1, 1)
    e_zeta, e_sigma = rel(vc.zeta_sq, ref["zeta_sq"]), rel(vc.sigma, ref["sigma"])
    ok = e_zeta <= 1e-12 and e_sigma <= 1e-12 and abs(vc.zeta_sq - 3.914213562) < 5e-10
    verdict(capsys, 2, ok, f"zeta^2={vc.zeta_sq:.10f} sigma={vc.sigma:.10f} "
                           f"rel errors {e_zeta:.1e}, {e_sigma:.1e}")


def test_criterion_3_ou_exactness(capsys):
    model, mp = SingleWell(), ModelParams(2.0, 1.0)
    m = 10_000
    Z0 = np.random.default_rng(3).standard_normal((m, 2))
    cfg = SimConfig(dt=1e-3, t_max=5.0, ensemble_size=m, seed=3, record_stride=100)
    ens = simulate_ensemble(model, mp, cfg, Z0)
    acf = autocorrelation(ens.times, ens.states[:, :, 0], ens.valid)
    exact = (1.0 + acf.t) * np.exp(-acf.t)
    z = np.abs(acf.C - exact) / acf.stderr
    rate = estimate_decay_rate(acf, WindowPolicy(), gamma=mp.gamma, observable="x_1")
    sigma = villani_certificate(mp, rho=1.0, M=1.0).sigma
    cmp = compare_certificate(sigma, rate)
    ok = bool(np.all(z <= 3.0)) and cmp["verdict"] == "PASS" and ens.n_invalid == 0
    verdict(capsys, 3, ok, f"{len(z)} lags, max z={z.max():.2f}, rate={rate.rate:.4f}"
                           f"+-{rate.stderr:.4f} vs sigma/2={cmp['threshold']:.6f}")


@pytest.mark.parametrize("model", [DoubleWell(N=2), SingularPair(N=2, k=1)], ids=repr)
def test_criterion_4_lyapunov_drift(model, capsys):
    mp = ModelParams(2.0, 1.0, N=model.N, k=model.k)
    cert = build_certificate(model, growth_constants_for(model, 1.0), mp, 1.0)
    weight = LyapunovWeight(model, cert)
    Z = sample_invariant(model, mp, 10_000, SamplerConfig(seed=4))
    grid = stress_grid(model, cert, np.random.default_rng(4),
                       extra_positions=stress_positions(model, 100, 5))
    rep = drift_check(weight, np.concatenate([Z, grid]), atol=1e-8)
    ok = rep.n_violations == 0 and len(grid) >= 1000
    verdict(capsys, 4, ok, f"{model!r}: {rep.n_points} points ({len(grid)} stress), "
                           f"violations={rep.n_violations}, min margin={rep.min_margin:.3e}")


@pytest.mark.parametrize("N", [2, 3])
def test_criterion_5_growth_and_singular_bounds(N, capsys):
    model = SingularPair(N=N, k=1)
    T = 1.0
    gc = growth_constants_for(model, T)
    xs, _ = sample_positions(model, T, 90_000, SamplerConfig(seed=5))
    rng = np.random.default_rng(5)
    X = np.concatenate([xs, stress_positions(model, 10_000, rng)])
    ys = rng.standard_normal(X.shape)
    reports = [check_growth_bound_1(model, gc, T, model.dim, X, ys),
               check_growth_bound_2(model, gc, X),
               *check_singular_bounds(model, X, ys)]
    viol = {r.name: r.n_violations for r in reports}
    ok = all(r.passed for r in reports) and len(X) == 100_000
    verdict(capsys, 5, ok, f"N={N}: {len(X)} configurations, violations={viol}")


@pytest.mark.parametrize("model", [SingleWell(), SingularPair(N=2, k=1)], ids=repr)
def test_criterion_6_measure_tails(model, capsys):
    mp = ModelParams(2.0, 1.0, N=model.N, k=model.k)
    cert = build_certificate(model, growth_constants_for(model, 1.0), mp, 1.0)
    Z, info = sample_invariant(model, mp, 100_000, SamplerConfig(seed=6), return_info=True)
    rep = mu_tail_checks(model, mp, cert, Z, sampler_info=info)
    c = rep["checks"]
    ok = rep["verdict"] == "PASS" and c["mu_K_complement"]["bound"] == pytest.approx(1.828216e-3, rel=1e-6)
    verdict(capsys, 6, ok, f"{model!r}: mu(K^c)={c['mu_K_complement']['estimate']:.3e} "
                           f"(bound {MU_KC_BOUND:.6e}), grad moment="
                           f"{c['grad_moment']['estimate']:.4g} (bound {c['grad_moment']['bound']:.4g}), "
                           f"acceptance={info['acceptance']:.2f}")


def test_criterion_7_poincare_calibration(capsys):
    uniform = [calibration_eigenvalue("uniform", n) for n in (32, 64, 128, 256)]
    gaussian = [calibration_eigenvalue("gaussian", n, T=1.0) for n in (32, 64, 128, 256)]
    e_u = rel(uniform[-1], math.pi ** 2)
    e_g = rel(gaussian[-1], 1.0)
    ratios = richardson(uniform)["ratios"] + richardson(gaussian)["ratios"]
    ok = e_u <= 0.01 and e_g <= 0.05 and min(ratios) >= 2.0
    verdict(capsys, 7, ok, f"uniform rel err {e_u:.2e}, gaussian rel err {e_g:.2e}, "
                           f"gap ratios {[round(r, 2) for r in ratios]}")


def _slope(Ns, sigmas):
    x = np.log(np.asarray(Ns, dtype=float))
    y = np.log(1.0 / np.asarray(sigmas, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def test_criterion_8_n_scaling(capsys):
    Ns = (2, 4, 8, 16)
    ours, ref = [], []
    for N in Ns:
        model = SingularPair(N=N, k=3)
        mp = ModelParams(1.0, 1.0, N=N, k=3)
        cert = build_certificate(model, growth_constants_for(model, 1.0), mp, 1.0)
        ours.append(cert.sigma)
        ref.append(float(oracle_mp.chain(oracle_mp.singular_growth(N, 3, 1, 1, 2, 6, 1),
                                         1, 1, 3 * N, 1)["sigma"]))
    s_ours, s_ref = _slope(Ns, ours), _slope(Ns, ref)
    ok = (all(math.isfinite(s) and s > 0 for s in ours) and math.isfinite(s_ours)
          and abs(s_ours - s_ref) <= 0.1 * abs(s_ref))
    verdict(capsys, 8, ok, f"sigma_N={[f'{s:.3e}' for s in ours]}, slope {s_ours:.4f} "
                           f"vs high-precision {s_ref:.4f}")


def test_criterion_9_growth_constant_goldens(capsys):
    gc = growth_constants_singular(2, 3, 1.0, 1.0, 2, 6.0, 1.0)
    ref = oracle_mp.singular_growth(2, 3, 1, 1, 2, 6, 1)
    errs = {k: rel(getattr(gc, k), ref[k]) for k in ("kappa2", "c0", "d0", "c_inf", "d_inf")}
    exact = (gc.c0 == 1152.0 and gc.c_inf == 0.015625 and gc.eta0 == 6.0 and gc.eta_inf == 2.0)
    ok = max(errs.values()) <= 1e-12 and exact
    verdict(capsys, 9, ok, f"max rel error {max(errs.values()):.1e}, exact structural cases {exact}")


def _harmonic_energy_error(dt, t_max=10.0):
    m = SingleWell()
    ens = simulate_ensemble(m, ModelParams(0.0, 0.0), SimConfig(dt=dt, t_max=t_max),
                            np.array([[1.0, 0.0]]))
    H = hamiltonian(m, ens.states[:, 0, :1], ens.states[:, 0, 1:])
    return float(np.max(np.abs(H - H[0])))


def test_criterion_10_integrator_physics(capsys):
    ratio = _harmonic_energy_error(0.02) / _harmonic_energy_error(0.01)
    m = DoubleWell(N=2)
    ens = simulate_ensemble(m, ModelParams(1.0, 0.0, N=2), SimConfig(dt=1e-3, t_max=5.0),
                            np.array([[1.5, -0.3, 2.0, 1.0]]))
    H = hamiltonian(m, ens.states[:, 0, :2], ens.states[:, 0, 2:])
    monotone = bool(np.all(np.diff(H) <= 1e-12))
    factor_err = max(abs(ou_factor(g, dt) - math.exp(-g * dt))
                     for g in (0.1, 2.0, 10.0) for dt in (1e-4, 1e-3, 0.1))
    v = np.array([0.7, -1.2])
    step_err = float(np.max(np.abs(ou_step(v, 2.0, 0.0, 1e-3, np.zeros(2)) - v * math.exp(-2e-3))))
    ok = abs(ratio - 4.0) <= 0.5 and monotone and factor_err <= 1e-14 and step_err <= 1e-14
    verdict(capsys, 10, ok, f"energy ratio {ratio:.3f}, T=0 monotone H {monotone}, "
                            f"OU factor error {factor_err:.1e}")
