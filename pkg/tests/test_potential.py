import math

import numpy as np
import pytest

from langevin_cert.certificate import growth_constants_for
from langevin_cert.errors import DomainError
from langevin_cert.potential import (
    DoubleWell, PhasePoint, SingleWell, SingularPair, check_growth_bound_1,
    check_growth_bound_2, check_singular_bounds, initial_position, make_potential,
    potential_from_config, singular_gradient_lower_bound, stress_positions)


def fd_grad(model, x, h=1e-6):
    out = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (model.value(x + e) - model.value(x - e)) / (2 * h)
    return out


def fd_hess(model, x, h=1e-5):
    d = x.size
    H = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        H[:, j] = (model.gradient(x + e) - model.gradient(x - e)) / (2 * h)
    return H


MODELS = [SingleWell(N=3), DoubleWell(N=2), SingularPair(N=2, k=1),
          SingularPair(N=3, k=2), SingularPair(N=2, k=1, A=2.0, B=0.5, a=4, b=3.0)]


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_gradient_and_hessian_match_finite_differences(model, rng):
    x0 = initial_position(model)
    for _ in range(5):
        x = x0 + 0.05 * rng.standard_normal(model.dim)
        if not model.in_domain(x):
            continue
        g = model.gradient(x)
        assert np.allclose(g, fd_grad(model, x), rtol=1e-5, atol=1e-6)
        H = model.hessian(x)
        assert np.allclose(H, H.T, atol=1e-10 * (1 + np.abs(H).max()))
        assert np.allclose(H, fd_hess(model, x), rtol=1e-5, atol=1e-5 * (1 + np.abs(H).max()))
        y = rng.standard_normal(model.dim)
        assert np.allclose(model.hessian_vec(x, y), H @ y)


def test_single_well_closed_forms():
    m = SingleWell(N=2)
    x = np.array([1.0, -2.0])
    assert m.value(x) == pytest.approx(2.5)
    assert np.allclose(m.gradient(x), x)
    assert np.allclose(m.hessian(x), np.eye(2))


def test_double_well_minima():
    m = DoubleWell()
    assert m.value(np.array([1.0])) == 0.0
    assert m.value(np.array([0.0])) == pytest.approx(0.25)


def test_batch_and_single_agree(rng):
    m = SingularPair(N=3, k=1)
    xs = stress_positions(m, 20, rng)
    batch = m.value(xs)
    single = np.array([m.value(x) for x in xs])
    assert np.allclose(batch, single)


def test_singular_domain():
    m = SingularPair(N=2, k=1)
    assert m.value(np.array([0.0, 0.0])) == math.inf
    assert not m.in_domain(np.array([0.0, 0.0]))
    assert not m.in_domain(np.array([1.0, -1.0]))  # ordering violated
    with pytest.raises(DomainError):
        m.gradient(np.array([0.0, 0.0]))


def test_one_dimensional_pairs_must_be_ordered():
    with pytest.raises(ValueError):
        SingularPair(N=2, k=1, ordered=False)
    m = SingularPair(N=2, k=2)
    assert m.in_domain(np.array([1.0, 0.0, -1.0, 0.0]))


def test_factory_and_config_round_trip():
    for m in MODELS:
        cfg = {k: str(v) for k, v in m.to_config().items()}
        assert potential_from_config(cfg) == m
    with pytest.raises(ValueError):
        make_potential("Nope")


def test_phase_point():
    p = PhasePoint([1.0, 2.0], [3.0, 4.0])
    assert np.array_equal(PhasePoint.from_z(p.z).x, p.x)
    with pytest.raises(ValueError):
        PhasePoint([1.0], [1.0, 2.0])


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_growth_bounds_hold_on_stress_points(model, rng):
    T = 1.0
    gc = growth_constants_for(model, T)
    xs = stress_positions(model, 400, rng)
    ys = rng.standard_normal(xs.shape)
    assert check_growth_bound_1(model, gc, T, model.dim, xs, ys).passed
    assert check_growth_bound_2(model, gc, xs).passed


def test_growth_bound_detects_a_bad_constant(rng):
    m = SingularPair(N=2, k=1)
    gc = growth_constants_for(m, 1.0)
    from dataclasses import replace
    bad = replace(gc, c_inf=gc.c_inf * 1e6)
    xs = stress_positions(m, 200, rng, far_scale=100.0)
    assert not check_growth_bound_2(m, bad, xs).passed


def test_singular_bounds(rng):
    m = SingularPair(N=3, k=2)
    xs = stress_positions(m, 300, rng)
    g, h = check_singular_bounds(m, xs, rng=rng)
    assert g.passed and h.passed
    lower = singular_gradient_lower_bound(m, xs)
    assert np.all(lower <= np.linalg.norm(m.gradient(xs), axis=1) + 1e-9)
    with pytest.raises(ValueError):
        check_singular_bounds(SingleWell(), xs[:, :1])
