import dataclasses

import numpy as np
import pytest

from hsdecomp import atomic
from hsdecomp.fields import make_field
from hsdecomp.maxfn import sobolev_sharp
from hsdecomp.space import discrete_gradient, make_ball


@pytest.fixture(scope="module")
def bumpy(request):
    from hsdecomp.space import build_space
    sp = build_space("cloud(32,seed=3)")
    return sp, make_field(sp, "random-lipschitz(seed=2)") + 3 * make_field(sp, "bump(1)")


def test_flavor_names():
    assert atomic.atom_flavor("hs-moment") == "hs_moment"
    with pytest.raises(atomic.AtomicError):
        atomic.atom_flavor("bmo")


def test_two_point_atom_tuned_to_bound(p4):
    ball = make_ball(p4, 1, 1.0)  # {0, 1, 2}
    shape = np.array([0.0, 1.0, -1.0, 0.0])
    bound = atomic.size_exponent(ball.mass, 2.0)
    c = bound / atomic.lebesgue_norm(discrete_gradient(p4, shape), p4.measure, 2.0)
    assert atomic.validate_atom(p4, c * shape, ball, "hs_moment").passed
    rep = atomic.validate_atom(p4, 1.01 * c * shape, ball, "hs_moment")
    assert not rep.passed and rep.failures[0].startswith("grad")
    unbalanced = atomic.validate_atom(p4, c * np.array([0.0, 1.0, 0.0, 0.0]), ball, "hs_moment")
    assert any(f.startswith("moment") for f in unbalanced.failures)


def test_zero_atom_passes_every_flavor(p4):
    ball = make_ball(p4, 0, 1.0)
    for flavor in atomic.ATOM_FLAVORS:
        assert atomic.validate_atom(p4, np.zeros(4), ball, flavor).passed


def test_support_violation_names_the_point(p4):
    rep = atomic.validate_atom(p4, np.array([0.0, 0.0, 0.0, 0.01]), make_ball(p4, 0, 1.0), "hs_size")
    assert not rep.passed
    assert "point 3" in rep.failures[0]


def test_constant_field_has_no_atoms(p4):
    f = np.full(4, 1.25)
    dec = atomic.atomic_decompose(p4, f, "hs_moment")
    assert dec.atoms == [] and dec.l1_sum == 0
    np.testing.assert_array_equal(dec.residual, f)
    total, err = atomic.reconstruct(p4, dec)
    np.testing.assert_array_equal(total, f)


@pytest.mark.parametrize("flavor", atomic.DECOMP_FLAVORS)
def test_decomposition_identities(bumpy, flavor):
    sp, f = bumpy
    dec = atomic.atomic_decompose(sp, f, flavor)
    assert dec.atoms, "field should reach several dyadic levels"
    rep = atomic.decomposition_report(sp, dec, sobolev_sharp(sp, f))
    assert rep["failed_atoms"] == []
    assert rep["sum_error"] <= 1e-12 * max(1.0, np.abs(f).max())
    if flavor in atomic.MOMENT_FLAVORS:
        assert rep["moment_sum_error"] <= 1e-12 * max(1.0, np.abs(f).max())
    assert max(rep["reconstruction"].values()) <= 1e-9 * max(1.0, np.abs(f).max())
    assert rep["C_lambda"] <= 1e3 and rep["C_residual_grad"] <= 1e3


def test_dropping_an_atom(bumpy):
    sp, f = bumpy
    dec = atomic.atomic_decompose(sp, f, "hs_moment")
    at = dec.atoms[0]
    _, err = atomic.reconstruct(sp, dataclasses.replace(dec, atoms=dec.atoms[1:]))
    scaled = at.lam * at.a
    assert err["sup"] == pytest.approx(np.abs(scaled).max(), rel=1e-9)
    assert err["l1"] == pytest.approx(np.dot(np.abs(scaled), sp.measure), rel=1e-9)
    assert err["w11"] == pytest.approx(np.dot(discrete_gradient(sp, scaled), sp.measure), rel=1e-9)


def test_dyadic_shift(bumpy):
    sp, f = bumpy
    a, b = atomic.atomic_decompose(sp, f, "hs_moment"), atomic.atomic_decompose(sp, 2 * f, "hs_moment")
    assert (b.j_min, b.j_max) == (a.j_min + 1, a.j_max + 1)
    assert len(a.atoms) == len(b.atoms)
    for x, y in zip(a.atoms, b.atoms):
        np.testing.assert_allclose(y.a, x.a, rtol=1e-9, atol=1e-12)
        assert y.lam == pytest.approx(2 * x.lam, rel=1e-9)


def test_h1_atom_grand_maximal(p4):
    ball = make_ball(p4, 1, 1.0)
    a = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2) * atomic.size_exponent(ball.mass, 2.0)
    assert atomic.validate_atom(p4, a, ball, "h1").passed
    val = atomic.h1_atom_grand_maximal_check(p4, a, ball)
    assert 0 < val <= 1e2
    assert atomic.h1_atom_grand_maximal_check(p4, a / 2, ball) == pytest.approx(val / 2, rel=1e-9)
    assert atomic.h1_atom_grand_maximal_check(p4, np.zeros(4), ball) == 0


def test_random_h1_atoms_are_valid(grid4):
    rng = np.random.default_rng(9)
    for _ in range(10):
        a, ball = atomic.random_h1_atom(grid4, rng)
        assert atomic.validate_atom(grid4, a, ball, "h1").passed
