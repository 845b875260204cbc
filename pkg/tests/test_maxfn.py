import math

import numpy as np
import pytest

from hsdecomp.fields import default_fields, make_field
from hsdecomp.maxfn import (calderon_star, discrete_convolution, grad_maximal_star, grad_plus, grad_plus_ball,
                            grad_plus_ball_oracle, grand_maximal, hl_maximal, hl_maximal_q, sobolev_sharp)
from hsdecomp.space import build_space, discrete_gradient

# frozen oracles on P4 with f = [0, 1, 2, 3]
P4_M = [1.5, 2.0, 2.5, 3.0]
P4_N = [2 / 3] * 4
P4_STAR = [1.0] * 4
P4_PLUS_EXACT = [1.5, 2.0, 2.5, 3.0]
P4_PLUS_TENT = [7 / 6, 4 / 3, 2.0, 3.0]
P4_GRAD_PLUS = [5 / 6] * 4


def test_p4_oracles(p4, ramp):
    np.testing.assert_allclose(hl_maximal(p4, ramp), P4_M, rtol=1e-12)
    np.testing.assert_allclose(sobolev_sharp(p4, ramp), P4_N, rtol=1e-12)
    np.testing.assert_allclose(calderon_star(p4, ramp), P4_STAR, rtol=1e-12)
    np.testing.assert_allclose(grand_maximal(p4, ramp, "exact_lp"), P4_PLUS_EXACT, rtol=1e-9)
    np.testing.assert_allclose(grand_maximal(p4, ramp, "tent"), P4_PLUS_TENT, rtol=1e-12)
    np.testing.assert_allclose(grad_plus(p4, ramp), P4_GRAD_PLUS, rtol=1e-9)


def test_mq_small_exponent(p4, ramp):
    expected = ((0 + 1 + math.sqrt(2) + math.sqrt(3)) / 4) ** 2  # whole space is the best ball at 0
    assert hl_maximal_q(p4, ramp, 0.5)[0] == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(hl_maximal_q(p4, ramp - 1.5, 1.0), hl_maximal(p4, np.abs(ramp - 1.5)))
    with pytest.raises(ValueError):
        hl_maximal_q(p4, ramp, 0.0)


def test_point_indicator_dominated(p4):
    f = np.array([0.0, 1.0, 0.0, 0.0])
    assert np.all(hl_maximal(p4, f) >= f)


def test_constant_fields(cycle8):
    c = np.full(cycle8.n, -2.5)
    np.testing.assert_allclose(hl_maximal(cycle8, c), 2.5)
    np.testing.assert_allclose(hl_maximal_q(cycle8, c, 0.7), 2.5)
    assert not np.any(sobolev_sharp(cycle8, c))
    assert not np.any(calderon_star(cycle8, c))
    np.testing.assert_allclose(grand_maximal(cycle8, c, "exact_lp"), 2.5, rtol=1e-9)
    assert not np.any(grad_plus(cycle8, c))
    assert not np.any(grad_maximal_star(cycle8, c, [0.5, 1.0]))
    u, _ = discrete_convolution(cycle8, c, 0.7)
    np.testing.assert_allclose(u, -2.5, rtol=1e-14)


def test_homogeneity_p4(p4, ramp):
    for op in (sobolev_sharp, calderon_star, hl_maximal):
        np.testing.assert_allclose(op(p4, -3 * ramp), 3 * op(p4, ramp), rtol=1e-12)
    np.testing.assert_allclose(sobolev_sharp(p4, 2 * ramp + 7), 2 * sobolev_sharp(p4, ramp), rtol=1e-12)


def test_star_controls_n_everywhere():
    for spec in ("cycle(8)", "grid(4x4)", "cloud(64,seed=7)"):
        sp = build_space(spec)
        for fs in default_fields(0):
            f = make_field(sp, fs)
            assert np.all(sobolev_sharp(sp, f) <= 2 * calderon_star(sp, f) * (1 + 1e-12) + 1e-15)


def test_tent_below_exact_and_f_below_plus(cycle8):
    rng = np.random.default_rng(4)
    for _ in range(3):
        f = rng.standard_normal(cycle8.n)
        tent, exact = grand_maximal(cycle8, f, "tent"), grand_maximal(cycle8, f, "exact_lp")
        assert np.all(tent <= exact + 1e-9)
        assert np.all(np.abs(f) <= exact + 1e-9)


def test_grand_maximal_mode_errors(p4, ramp):
    with pytest.raises(ValueError):
        grand_maximal(p4, ramp, "simplex")
    with pytest.raises(ValueError):
        grand_maximal(p4, ramp[:3], "tent")


def test_grad_plus_matches_oracle_on_small_spaces(p4, cycle8):
    for sp in (p4, cycle8):
        f = make_field(sp, "random-lipschitz(seed=2)")
        for b in range(len(sp.balls)):
            assert grad_plus_ball(sp, f, b).value == pytest.approx(grad_plus_ball_oracle(sp, f, b), rel=1e-6, abs=1e-9)


def test_grad_plus_dominated_by_n(grid4):
    f = make_field(grid4, "bump(1)")
    gp, info = grad_plus(grid4, f, return_details=True)
    assert info["certified"]
    assert np.all(gp <= (1 + grid4.degree.max()) * sobolev_sharp(grid4, f) + 1e-12)


def test_oracle_refuses_dense_graphs():
    sp = build_space("cloud(32,seed=3)")
    with pytest.raises(ValueError):
        grad_plus_ball_oracle(sp, np.arange(sp.n, dtype=float), 0)


def test_convolution_limits(p4, ramp):
    u, cover = discrete_convolution(p4, ramp, 10.0)
    np.testing.assert_allclose(u, ramp.mean())
    assert len(cover.centers) == 1
    u1, cov1 = discrete_convolution(p4, ramp, 1.0)
    np.testing.assert_allclose(cov1.weights.sum(axis=0), 1.0)
    assert cov1.centers.tolist() == [0, 2]
    assert np.all(discrete_gradient(p4, u1) <= 100 * sobolev_sharp(p4, ramp))


def test_single_radius_star_is_gradient_of_u(grid4):
    f = make_field(grid4, "random-lipschitz(seed=1)")
    u, _ = discrete_convolution(grid4, f, 1.0)
    np.testing.assert_allclose(grad_maximal_star(grid4, f, [1.0]), discrete_gradient(grid4, u))
