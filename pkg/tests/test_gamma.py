import warnings

import numpy as np
import pytest

from langevin_cert import ModelParams, SingleWell, sample_invariant
from langevin_cert.dynamics import SamplerConfig
from langevin_cert.gamma import (
    NumericalQualityWarning, ScalarField, StencilConfig, apply_L, apply_Lstar,
    check_gamma3_inequality, cross_term_coefficient, field_library, gamma2_closed,
    gamma2_def, gamma_form, gamma_form_def, hamiltonian_field, linear_field,
    quadratic_field, stationarity_check, verify_gamma2_identity)


def test_generator_on_linear_and_quadratic_fields():
    m, mp = SingleWell(), ModelParams(2.0, 1.0)
    Z = np.array([[0.3, -1.2], [1.0, 0.5]])
    x, v = Z[:, 0], Z[:, 1]
    # f = x: Lf = v; f = v: Lf = -gamma v - x
    assert np.allclose(apply_L(m, mp, linear_field(np.array([1.0, 0.0])), Z), v)
    assert np.allclose(apply_L(m, mp, linear_field(np.array([0.0, 1.0])), Z), -2 * v - x)
    # adjoint flips the transport part
    assert np.allclose(apply_Lstar(m, mp, linear_field(np.array([0.0, 1.0])), Z), -2 * v + x)
    # f = v^2: Lf = -2 gamma v^2 - 2 x v + 2 gamma T
    vsq = quadratic_field(np.diag([0.0, 2.0]))
    assert np.allclose(apply_L(m, mp, vsq, Z), -4 * v ** 2 - 2 * x * v + 4.0)


def test_generator_kills_constants_and_H_is_stationary():
    m, mp = SingleWell(), ModelParams(1.0, 1.0)
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((50, 2))
    const = ScalarField("one", lambda Z: np.ones(len(Z)))
    assert np.allclose(apply_L(m, mp, const, Z), 0, atol=1e-6)
    H = hamiltonian_field(m)
    # L H = gamma (T d - |v|^2)
    assert np.allclose(apply_L(m, mp, H, Z), 1.0 * (1.0 - Z[:, 1] ** 2), atol=1e-8)


def test_carre_du_champ_definition_matches_closed_form(family):
    m, mp = family
    rng = np.random.default_rng(1)
    Z = sample_invariant(m, mp, 30, SamplerConfig(seed=3, burn_in=300))
    for f in field_library(m.dim)[:6]:
        by_def = gamma_form_def(m, mp, f, Z)
        closed = gamma_form(mp, f, Z, model=m)
        assert np.allclose(by_def, closed, rtol=1e-4, atol=1e-6), f.name


def test_hand_computed_iterated_forms():
    # f = x v on the single well, gamma = 2, T = 1: Yg = x, Zg = v - c x, grad_v Zg = 1
    m, mp = SingleWell(), ModelParams(2.0, 1.0)
    f = quadratic_field(np.array([[0.0, 1.0], [1.0, 0.0]]), "xv")
    Z = np.array([[0.0, 0.0], [0.7, -0.4]])
    x, v = Z[:, 0], Z[:, 1]
    c = 1 + np.sqrt(2)
    yg, zg = x, v - c * x
    exp_y = -yg * zg + (2 - c) * yg ** 2
    exp_z = 2.0 + c * zg ** 2 + c * (c - 2) * yg * zg + yg * zg
    assert np.allclose(gamma2_closed(m, mp, "Y", f, Z), exp_y)
    assert np.allclose(gamma2_closed(m, mp, "Z", f, Z), exp_z)
    origin = Z[:1]
    assert gamma2_closed(m, mp, "Y", f, origin)[0] == pytest.approx(0.0)
    assert gamma2_def(m, mp, "Z", f, origin)[0] == pytest.approx(2.0, rel=1e-6)


def test_identity_suite_passes(family):
    m, mp = family
    Z = sample_invariant(m, mp, 40, SamplerConfig(seed=5, burn_in=300))
    for f in field_library(m.dim, seed=5):
        for which in "YZ":
            rep = verify_gamma2_identity(m, mp, which, f, Z)
            assert rep.passed, rep.to_dict()


def test_identity_with_derivative_free_field(family):
    m, mp = family
    Z = sample_invariant(m, mp, 20, SamplerConfig(seed=6, burn_in=300))
    f = field_library(m.dim)[1].without_derivatives()
    for which in "YZ":
        assert verify_gamma2_identity(m, mp, which, f, Z).passed


def test_inequality_holds(family):
    m, mp = family
    Z = sample_invariant(m, mp, 40, SamplerConfig(seed=8, burn_in=300))
    for f in field_library(m.dim, seed=8):
        rep = check_gamma3_inequality(m, mp, f, Z)
        assert rep.passed, rep.to_dict()


def test_cross_term_vanishes():
    for g in np.random.default_rng(2).uniform(0.01, 5.0, 100):
        assert abs(cross_term_coefficient(g)) <= 1e-14


def test_bad_step_triggers_quality_warning():
    m, mp = SingleWell(), ModelParams(2.0, 1.0)
    f = field_library(1)[5]
    Z = np.array([[0.3, 0.2]])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        gamma2_def(m, mp, "Y", f, Z, StencilConfig(h_x=1e-8, h_v=1e-8))
    assert any(issubclass(w.category, NumericalQualityWarning) for w in rec)


def test_generator_has_zero_mean_under_mu(family):
    m, mp = family
    Z = sample_invariant(m, mp, 4000, SamplerConfig(seed=9, burn_in=1000))
    rows = stationarity_check(m, mp, field_library(m.dim)[:4], Z, n_sigma=4.0)
    assert all(r["passed"] for r in rows), rows
