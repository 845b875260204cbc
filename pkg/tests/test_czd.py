import numpy as np
import pytest

from hsdecomp import czd
from hsdecomp.fields import make_field
from hsdecomp.maxfn import calderon_star
from hsdecomp.space import discrete_gradient, doubling_profile


def test_q_window(p4):
    lo, hi = czd.admissible_q(p4)
    s = doubling_profile(p4).s
    assert (lo, hi) == (pytest.approx(s / (s + 1)), 1.0)
    assert czd.default_q(p4) == pytest.approx((lo + 1) / 2)
    assert czd.check_q(p4, 0.99) == 0.99
    for bad in (lo, 1.0, 0.1):
        with pytest.raises(czd.CZError):
            czd.check_q(p4, bad)


def test_flavor_aliases():
    assert czd.flavor_tag("homog") == "homogeneous"
    assert czd.flavor_tag("m11") == "m11"
    with pytest.raises(czd.CZError):
        czd.flavor_tag("dyadic")


def test_level_membership_flips(p4, ramp):
    q = czd.default_q(p4)
    h0 = czd.level_data(p4, ramp, q, "homogeneous").level[0]
    assert 0 in czd.level_set(p4, ramp, q, h0 * (1 - 1e-9), "homogeneous")
    assert 0 not in czd.level_set(p4, ramp, q, h0 * (1 + 1e-9), "homogeneous")
    with pytest.raises(czd.CZError):
        czd.level_set(p4, ramp, q, 0.0, "homogeneous")


def test_empty_level_set_keeps_f(p4, ramp):
    q = czd.default_q(p4)
    alpha = 1.0  # above the constant level 2/3
    dec = czd.cz_decompose(p4, ramp, q, alpha, "homogeneous")
    assert len(dec.omega) == 0 and dec.b.shape[0] == 0
    np.testing.assert_array_equal(dec.g, ramp)
    rep = czd.verify_cz(p4, dec)
    assert rep.residual == 0 and rep.C_b1 == 0
    assert rep.C_g == pytest.approx(discrete_gradient(p4, ramp).max() / alpha)


def test_whole_space_level_set_is_an_error(p4, ramp):
    with pytest.raises(czd.CZError):
        czd.cz_decompose(p4, ramp, czd.default_q(p4), 0.5, "homogeneous")


def test_hand_run_singleton_pieces(p4):
    # f = [0,0,0,1]: level ≈ [0.403, 0.481, 0.5, 0.5], so alpha = 0.49 gives Ω = {2, 3}, F = {0, 1}.
    # Greedy: center 3 (d = 2) then 2 (d = 1); tents reduce to indicators, so b ≡ 0 and g = f.
    f = np.array([0.0, 0.0, 0.0, 1.0])
    dec = czd.cz_decompose(p4, f, czd.default_q(p4), 0.49, "homogeneous")
    assert dec.omega.tolist() == [2, 3]
    assert dec.cover.centers.tolist() == [3, 2]
    np.testing.assert_allclose(dec.cover.radii, [1.0, 0.5])
    np.testing.assert_allclose(dec.pu.chi, [[0, 0, 0, 1], [0, 0, 1, 0]])
    np.testing.assert_allclose(dec.c, [1.0, 0.0])
    assert not np.any(dec.b)
    np.testing.assert_array_equal(dec.g, f)
    rep = czd.verify_cz(p4, dec)
    assert rep.residual == 0 and rep.C_b1 == 0 and rep.K == 2
    assert rep.C_g == pytest.approx(1 / 0.49)


def test_scale_equivariance(grid4):
    f = make_field(grid4, "bump(3)")
    q = czd.default_q(grid4)
    h = np.unique(czd.level_data(grid4, f, q, "homogeneous").level)
    alpha = float(h[len(h) // 2 - 1] + h[len(h) // 2]) / 2
    d1 = czd.cz_decompose(grid4, f, q, alpha, "homogeneous")
    d2 = czd.cz_decompose(grid4, 2 * f, q, 2 * alpha, "homogeneous")
    assert np.array_equal(d1.omega, d2.omega)
    assert np.array_equal(d1.cover.centers, d2.cover.centers)
    np.testing.assert_allclose(d2.b, 2 * d1.b, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(d2.g, 2 * d1.g, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("flavor", czd.FLAVORS)
def test_postconditions_on_cloud(cloud32, flavor):
    q = czd.default_q(cloud32)
    f = make_field(cloud32, "random-lipschitz(seed=5)")
    data = czd.level_data(cloud32, f, q, flavor)
    star = calderon_star(cloud32, f)
    for alpha in np.linspace(data.level.min(), data.level.max(), 6)[1:]:
        dec = czd.cz_decompose(cloud32, f, q, float(alpha), flavor, data)
        rep = czd.verify_cz(cloud32, dec)
        assert rep.residual <= 1e-9 * max(1.0, np.abs(f).max())
        assert rep.support_ok and rep.K <= 64
        assert max(rep.C_g, rep.C_b1, rep.C_bq, rep.C_B) <= 1e3
        if flavor == "m11" and len(dec.omega):
            assert np.abs(dec.c).max() <= 2 * alpha
            assert star[dec.selected].max() <= czd.c_q(q) * alpha
