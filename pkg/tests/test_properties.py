import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from langevin_cert import ModelParams, SingularPair, SingleWell
from langevin_cert.certificate import (
    build_certificate, friction_constant, growth_constants_singular, villani_certificate)
from langevin_cert.gamma import R_term, cross_term_coefficient, gamma_form, linear_field
from langevin_cert.harness import aggregate, dumps_report
from langevin_cert.lyapunov import smooth_step

gammas = st.floats(0.05, 5.0)
temps = st.floats(0.1, 5.0)


@given(gammas)
def test_friction_constant_properties(g):
    c = friction_constant(g)
    assert c > g and c > 1
    assert abs(cross_term_coefficient(g)) <= 1e-14


@given(gammas, temps, st.floats(0.1, 10.0), st.floats(0.0, 5.0))
def test_villani_sigma_bounds(g, T, rho, M):
    vc = villani_certificate(ModelParams(g, T), rho=rho, M=M)
    assert 0 < vc.sigma <= g / 4
    assert vc.zeta_sq > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), gammas, temps, st.floats(0.1, 10.0))
def test_general_certificate_invariants(N, k, g, T, rho_K):
    mp = ModelParams(g, T, N=N, k=k)
    gc = growth_constants_singular(N, k, 1.0, 1.0, 2, 6.0, T)
    cert = build_certificate(None, gc, mp, rho_K)
    assert cert.check_invariants() == []
    assert cert.sigma > 0 and math.isfinite(cert.sigma)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_smooth_step_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert smooth_step(lo) <= smooth_step(hi)
    assert 0.0 <= smooth_step(lo) <= 1.0


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.5, 4.0))
def test_carre_du_champ_nonnegative_and_quadratic(coef, g):
    f = linear_field(np.array(coef))
    Z = np.random.default_rng(0).standard_normal((5, 4))
    mp = ModelParams(g, 1.0, N=2)
    val = gamma_form(mp, f, Z)
    assert np.all(val >= 0)
    assert np.allclose(val, g * (coef[2] ** 2 + coef[3] ** 2))


@given(st.floats(0.5, 4.0))
def test_R_term_single_well(g):
    m = SingleWell(N=2)
    y = np.array([[1.0, 2.0]])
    assert R_term(m, ModelParams(g, 1.0, N=2), np.zeros((1, 2)), y)[0] == \
        pytest.approx(5 * (2 / g + 1 / (2 * g)), rel=1e-13)


@given(st.dictionaries(st.text(min_size=1, max_size=5),
                       st.one_of(st.floats(allow_nan=False), st.integers(), st.booleans(),
                                 st.text(max_size=8)), max_size=5))
def test_report_json_round_trip(section):
    import json
    text = dumps_report(aggregate({"s": dict(section, passed=True)}))
    assert dumps_report(json.loads(text)) == text
