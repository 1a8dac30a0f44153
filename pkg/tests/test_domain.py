import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import golden_inf_potential
from shlab.domain import (
    BallRadius, DirectionTable, DomainSpec, PotentialSpec, argmin_potential, eval_phi,
    eval_potential, hardy_constant, inf_potential, sphere_area,
)
from shlab.errors import DomainError, SingularityError, UnsupportedDomainError


def constant_table(value=1.0):
    polar = np.linspace(0, np.pi, 7)
    azimuth = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    return DirectionTable(polar, azimuth, np.full((7, 8), value))


BALL3 = DomainSpec.ball(3, 1.0)


def test_hardy_constant_and_sphere_area():
    assert hardy_constant(3) == 0.25
    assert hardy_constant(4) == 1.0
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(2) == pytest.approx(2 * math.pi)


def test_eval_phi_ball():
    assert eval_phi(DomainSpec.ball(3, 1.0), [0.3, 0, 0.4]) == 1.0
    spec = DomainSpec.ball(3, 2.5)
    for x in ([1, 2, 3], [0, 0, 0], [-5, 0.1, 0]):
        assert eval_phi(spec, x) == 2.5


def test_eval_phi_constant_table():
    spec = DomainSpec(3, constant_table(1.0))
    assert eval_phi(spec, [0, 1, 0]) == pytest.approx(1.0)
    assert spec.gauge.lipschitz == 0.0


def test_eval_phi_table_is_zero_homogeneous():
    polar = np.linspace(0, np.pi, 9)
    azimuth = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    values = 1.0 + 0.2 * np.cos(polar)[:, None] * np.ones(12)
    spec = DomainSpec(3, DirectionTable(polar, azimuth, values))
    x = np.array([0.2, -0.4, 0.7])
    assert eval_phi(spec, x) == pytest.approx(eval_phi(spec, 13.0 * x))


def test_eval_phi_table_rejects_origin():
    with pytest.raises(DomainError):
        eval_phi(DomainSpec(3, constant_table()), [0, 0, 0])


def test_domain_invariants():
    with pytest.raises(DomainError):
        DomainSpec.ball(2, 1.0)
    with pytest.raises(DomainError):
        BallRadius(-1.0)
    with pytest.raises(DomainError):
        DirectionTable([0, np.pi], [0.0], [[1.0], [-1.0]])
    with pytest.raises(UnsupportedDomainError):
        DomainSpec(3, constant_table()).radius


def test_potential_examples():
    assert eval_potential(BALL3, PotentialSpec.exact(), 0.5) == pytest.approx(16.0)
    assert eval_potential(BALL3, PotentialSpec.regularized(1.0), 0.5) == pytest.approx(16 / 81)
    assert eval_potential(BALL3, PotentialSpec.truncated(10.0), 0.5) == 10.0
    assert eval_potential(BALL3, PotentialSpec("as-printed"), 0.5) == pytest.approx(2.0)
    assert eval_potential(BALL3, PotentialSpec.classical(), 0.5) == pytest.approx(4.0)


def test_potential_at_point_matches_radius():
    x = np.array([0.3, 0.0, 0.4])
    assert eval_potential(BALL3, PotentialSpec.exact(), x=x) == pytest.approx(
        eval_potential(BALL3, PotentialSpec.exact(), 0.5))


@pytest.mark.parametrize("variant", ["exact", "as-printed"])
@pytest.mark.parametrize("r", [0.0, 1.0])
def test_singular_set_raises(variant, r):
    with pytest.raises(SingularityError):
        eval_potential(BALL3, PotentialSpec(variant), r)


def test_truncated_and_regularized_defined_on_closed_ball():
    assert eval_potential(BALL3, PotentialSpec.truncated(7.0), 0.0) == 7.0
    assert eval_potential(BALL3, PotentialSpec.truncated(7.0), 1.0) == 7.0
    assert np.isfinite(eval_potential(BALL3, PotentialSpec.regularized(0.1), 1.0))


def test_potential_spec_invariants():
    with pytest.raises(DomainError):
        PotentialSpec("truncated", 0.0)
    with pytest.raises(DomainError):
        PotentialSpec("regularized", 0.0, eps=0.0)
    with pytest.raises(DomainError):
        PotentialSpec("bogus")


def test_inf_potential_closed_forms():
    assert inf_potential(DomainSpec.ball(3, 1.0)) == pytest.approx(16.0)
    assert argmin_potential(DomainSpec.ball(3, 1.0)) == pytest.approx(0.5)
    assert inf_potential(DomainSpec.ball(4, 1.0)) == pytest.approx(6.75)
    assert argmin_potential(DomainSpec.ball(4, 1.0)) == pytest.approx(1 / math.sqrt(3))


@pytest.mark.parametrize("n,R", [(3, 2.0), (4, 1.0), (5, 0.7), (3, 1.0)])
def test_inf_potential_against_minimization_oracle(n, R):
    m, r_star = golden_inf_potential(n, R)
    assert inf_potential(DomainSpec.ball(n, R)) == pytest.approx(m, rel=1e-10)
    assert argmin_potential(DomainSpec.ball(n, R)) == pytest.approx(r_star, rel=1e-6)
    if (n, R) == (3, 2.0):
        assert m == pytest.approx(4.0, rel=1e-12)


def test_inf_potential_table_warns():
    with pytest.warns(UserWarning):
        m = inf_potential(DomainSpec(3, constant_table(2.0)))
    assert m == pytest.approx(4.0)


def test_hardy_coupling_identity():
    r = np.linspace(0.01, 0.99, 50)
    exact = eval_potential(BALL3, PotentialSpec.exact(), r)
    classical = eval_potential(BALL3, PotentialSpec.classical(), r)
    assert np.allclose(exact, classical * (1 - r) ** -2, rtol=1e-13)


def test_json_round_trip():
    for spec in (BALL3, DomainSpec(3, constant_table(1.5))):
        back = DomainSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert back.to_dict() == spec.to_dict()
    for p in (PotentialSpec.exact(0.3), PotentialSpec.truncated(10, 0.2), PotentialSpec.regularized(1e-3, 0.3)):
        assert PotentialSpec.from_dict(json.loads(json.dumps(p.to_dict()))) == p
    assert set(PotentialSpec.truncated(10, 0.2).to_dict()) == {"variant", "mu", "N"}


radii = st.floats(min_value=1e-4, max_value=1 - 1e-4)
epsilons = st.floats(min_value=1e-8, max_value=10.0)
dims = st.integers(min_value=3, max_value=7)


@settings(max_examples=200, deadline=None)
@given(r=radii, e1=epsilons, e2=epsilons, n=dims)
def test_regularized_monotone_in_eps(r, e1, e2, n):
    lo, hi = sorted((e1, e2))
    d = DomainSpec.ball(n, 1.0)
    assert eval_potential(d, PotentialSpec.regularized(lo), r) >= eval_potential(d, PotentialSpec.regularized(hi), r)


@settings(max_examples=200, deadline=None)
@given(r=radii, eps=epsilons, N1=st.floats(1e-3, 1e8), N2=st.floats(1e-3, 1e8), n=dims)
def test_domination_and_positivity(r, eps, N1, N2, n):
    d = DomainSpec.ball(n, 1.0)
    exact = eval_potential(d, PotentialSpec.exact(), r)
    reg = eval_potential(d, PotentialSpec.regularized(eps), r)
    lo, hi = sorted((N1, N2))
    t_lo = eval_potential(d, PotentialSpec.truncated(lo), r)
    t_hi = eval_potential(d, PotentialSpec.truncated(hi), r)
    assert 0 < reg <= exact
    assert 0 < t_lo <= t_hi <= exact
    for v in VARIANT_SPECS:
        assert eval_potential(d, v, r) > 0


VARIANT_SPECS = [PotentialSpec.exact(), PotentialSpec("as-printed"), PotentialSpec.truncated(5.0),
                 PotentialSpec.regularized(0.1), PotentialSpec.classical()]


def test_pointwise_convergence_of_approximations():
    r = np.array([0.05, 0.3, 0.5, 0.9, 0.999])
    exact = eval_potential(BALL3, PotentialSpec.exact(), r)
    errs = [np.max(np.abs(eval_potential(BALL3, PotentialSpec.regularized(e), r) / exact - 1))
            for e in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-4
    gaps = [np.max(exact - eval_potential(BALL3, PotentialSpec.truncated(N), r)) for N in (10, 1e3, 1e5, 1e7)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] == 0.0
