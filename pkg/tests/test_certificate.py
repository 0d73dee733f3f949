import json
import math

import mpmath as mp
import numpy as np
import pytest

import oracle_mp
from langevin_cert.certificate import (
    D_of_r, ModelParams, build_certificate, compute_alpha_beta, compute_R1_R2,
    double_well_kappas, friction_constant, growth_constants_double_well,
    growth_constants_for, growth_constants_singular, kappa0_threshold, solve_lambda0,
    villani_certificate)
from langevin_cert.potential import SingularPair


def close(a, b, rtol=1e-12):
    return abs(a - float(b)) <= rtol * abs(float(b))


def test_friction_constant_root():
    for g in (0.1, 1.0, 2.0, 5.0):
        c = friction_constant(g)
        assert c > 0 and abs(c * c - g * c - 1) < 1e-13
    assert close(friction_constant(2.0), 1 + math.sqrt(2))


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 1.0, N=0)
    with pytest.raises(ValueError):
        ModelParams(0.0, 1.0).require_positive()
    assert ModelParams(1.0, 2.0, N=2, k=3).Td == 12.0


def test_singular_growth_constants_against_oracle():
    gc = growth_constants_singular(2, 3, 1.0, 1.0, 2, 6.0, 1.0)
    ref = oracle_mp.singular_growth(2, 3, 1, 1, 2, 6, 1)
    for key in ("kappa2", "c0", "d0", "c_inf", "d_inf", "eta0", "eta_inf"):
        assert close(getattr(gc, key), ref[key]), key


def test_singular_growth_rejects_bad_parameters():
    with pytest.raises(ValueError):
        growth_constants_singular(2, 1, 1.0, 1.0, 3, 6.0, 1.0)
    with pytest.raises(ValueError):
        growth_constants_singular(2, 1, 1.0, -1.0, 2, 6.0, 1.0)


@pytest.mark.parametrize("N,k,A,B,a,b", [(2, 1, 1, 1, 2, 6), (3, 2, 2.0, 0.5, 4, 3.0),
                                         (4, 3, 1, 1, 2, 6)])
def test_general_chain_against_oracle(N, k, A, B, a, b):
    mp_ = ModelParams(1.5, 0.7, N=N, k=k)
    gc = growth_constants_singular(N, k, A, B, a, b, 0.7)
    cert = build_certificate(SingularPair(N=N, k=k, A=A, B=B, a=a, b=b), gc, mp_, 2.0)
    ref = oracle_mp.chain(oracle_mp.singular_growth(N, k, A, B, a, b, 0.7), 1.5, 0.7, N * k, 2.0)
    for key in ("c_gamma", "kappa_prime", "R1", "R2", "alpha", "beta", "rho_K_prime",
                "lambda0", "lambda_", "zeta_sq", "sigma"):
        assert close(getattr(cert, key), ref[key], 1e-10), key
    assert cert.check_invariants() == []


def test_certificate_serialisation():
    mp_ = ModelParams(1.0, 1.0, N=2)
    gc = growth_constants_singular(2, 1, 1, 1, 2, 6, 1.0)
    cert = build_certificate(None, gc, mp_, 1.0)
    data = json.loads(cert.to_json())
    assert data["sigma"] == cert.sigma
    assert data["route"] == "general"
    assert "formulas" in data
    assert data["b"] == pytest.approx(1 / cert.R2)


def test_lambda0_is_the_threshold():
    mp_ = ModelParams(1.0, 1.0, N=2)
    gc = growth_constants_singular(2, 1, 1, 1, 2, 6, 1.0)
    R1, R2 = compute_R1_R2(gc, mp_)
    _, beta, _ = compute_alpha_beta(mp_, R2)
    rho_p = 8.0
    lam0 = solve_lambda0(gc, mp_, beta, rho_p, R2)

    def gap(r):
        return r - R2 * math.log(D_of_r(r, gc, mp_)) - R2 * math.log(beta * rho_p + 1)

    assert gap(lam0) >= 0
    assert gap(lam0 * (1 - 1e-9)) < 0
    for r in np.geomspace(lam0, 1e6 * lam0, 50):
        assert gap(r) >= 0


def test_alpha_beta_relations():
    mp_ = ModelParams(2.0, 1.0, N=3)
    alpha, beta, beta_exact = compute_alpha_beta(mp_, 1000.0)
    assert beta / alpha == pytest.approx(5 * math.exp(4))
    assert beta_exact <= beta * math.exp(5 * 3 / 1000.0 - 2) * 1.0000001


def test_villani_single_well_against_oracle():
    vc = villani_certificate(ModelParams(2.0, 1.0), rho=1.0, M=1.0)
    ref = oracle_mp.villani(2, 1, 1, 1)
    assert close(vc.zeta_sq, ref["zeta_sq"])
    assert close(vc.sigma, ref["sigma"])
    assert json.loads(vc.to_json())["route"] == "villani"


def test_villani_double_well_kappas():
    mp_ = ModelParams(2.0, 1.0)
    k0, k0p = double_well_kappas(mp_)
    ref = oracle_mp.double_well_m2(2, 1, 1)
    assert close(k0, ref["kappa0"]) and close(k0p, ref["kappa0_prime"])
    vc = villani_certificate(mp_, rho=1.0, kappas=(k0, k0p))
    assert close(vc.M_sq, ref["M_sq"])
    with pytest.raises(ValueError):
        villani_certificate(mp_, rho=1.0, kappas=(2 * kappa0_threshold(mp_), 1.0))
    with pytest.raises(ValueError):
        villani_certificate(mp_, rho=1.0)


def test_double_well_growth_constants_hold(rng):
    from langevin_cert.potential import DoubleWell, check_growth_bound_1, check_growth_bound_2
    m = DoubleWell(N=2)
    gc = growth_constants_double_well(1.0, 2)
    r = np.concatenate([np.linspace(0, 3, 200), np.geomspace(3, 1e3, 200)])
    u = rng.standard_normal((400, 2))
    xs = r[:, None] * u / np.linalg.norm(u, axis=1, keepdims=True)
    assert check_growth_bound_1(m, gc, 1.0, 2, xs, rng.standard_normal(xs.shape)).passed
    assert check_growth_bound_2(m, gc, xs).passed


def test_sigma_decreases_with_rho_K():
    mp_ = ModelParams(1.0, 1.0, N=2)
    gc = growth_constants_for(SingularPair(N=2), 1.0)
    s = [build_certificate(None, gc, mp_, r).sigma for r in (0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b for a, b in zip(s, s[1:]))
