import math

import numpy as np
import pytest

from hsdecomp.space import (MetricMeasureSpace, SpaceValidationError, ball_average, build_space, discrete_gradient,
                            doubling_profile, enumerate_balls, load_space, make_ball, poincare_constant, read_field,
                            save_space, write_field)


def test_path_generator(p4):
    assert p4.n == 4
    np.testing.assert_array_equal(p4.dist, np.abs(np.subtract.outer(np.arange(4), np.arange(4))))
    np.testing.assert_array_equal(p4.measure, np.ones(4))
    assert p4.edges.tolist() == [[0, 1], [1, 2], [2, 3]]


def test_cycle_is_arc_length(cycle8):
    assert cycle8.n == 8
    assert cycle8.dist[0, 4] == pytest.approx(math.pi)
    assert cycle8.dist[0, 1] == pytest.approx(2 * math.pi / 8)
    assert len(cycle8.edges) == 8


def test_cloud_is_deterministic():
    a, b = build_space("cloud(64,seed=7)"), build_space("cloud(64,seed=7)")
    assert a.dist.tobytes() == b.dist.tobytes()
    assert np.array_equal(a.edges, b.edges)
    assert a.fingerprint() == b.fingerprint()


def test_rejects_bad_spaces():
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(SpaceValidationError):
        MetricMeasureSpace(d, np.array([1.0, 0.0]), np.array([[0, 1]]))
    with pytest.raises(SpaceValidationError):
        MetricMeasureSpace(np.zeros((2, 2)), np.ones(2), np.array([[0, 1]]))
    three = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float)  # triangle inequality fails
    with pytest.raises(SpaceValidationError):
        MetricMeasureSpace(three, np.ones(3), np.array([[0, 1], [1, 2]]))
    sq = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]], float)
    with pytest.raises(SpaceValidationError):  # disconnected edge graph
        MetricMeasureSpace(sq, np.ones(4), np.array([[0, 1], [2, 3]]))


def test_p4_ball_enumeration(p4):
    balls = enumerate_balls(p4)
    by_center = {c: sorted(b.radius for b in balls if b.center == c) for c in range(4)}
    assert by_center == {0: [1, 2, 3], 1: [1, 2], 2: [1, 2], 3: [1, 2, 3]}
    assert len(balls) == 10
    b11 = next(b for b in balls if b.center == 1 and b.radius == 1)
    assert b11.members.tolist() == [0, 1, 2]


def test_single_point_space_has_no_balls():
    sp = MetricMeasureSpace(np.zeros((1, 1)), np.ones(1), np.zeros((0, 2)))
    assert enumerate_balls(sp) == []
    prof = doubling_profile(sp)
    assert prof.c_d == 1 and prof.s == 0


def test_cycle_radii_are_distinct_arc_distances(cycle8):
    balls = enumerate_balls(cycle8)
    for c in range(8):
        radii = sorted(b.radius for b in balls if b.center == c)
        assert np.allclose(radii, [k * 2 * math.pi / 8 for k in range(1, 5)])


def test_ball_average(p4, ramp):
    assert ball_average(p4, ramp, make_ball(p4, 1, 1.0)) == pytest.approx(1.0)
    assert ball_average(p4, ramp, make_ball(p4, 0, 3.0)) == pytest.approx(1.5)
    assert ball_average(p4, np.full(4, 2.5), make_ball(p4, 2, 1.0)) == pytest.approx(2.5)


def test_p4_doubling(p4):
    prof = doubling_profile(p4)
    assert prof.c_d == 3
    assert prof.s == pytest.approx(math.log2(3))


def test_doubling_stable_under_relabeling(grid4):
    perm = np.random.default_rng(1).permutation(grid4.n)
    inv = np.argsort(perm)
    relabeled = MetricMeasureSpace(grid4.dist[np.ix_(perm, perm)], grid4.measure[perm], inv[grid4.edges])
    assert doubling_profile(relabeled).c_d == doubling_profile(grid4).c_d
    assert math.isfinite(doubling_profile(grid4).c_d)


def test_discrete_gradient(p4, ramp):
    np.testing.assert_allclose(discrete_gradient(p4, ramp), [1, 1, 1, 1])
    np.testing.assert_allclose(discrete_gradient(p4, [0, 0, 1, 1]), [0, 1, 1, 0])
    np.testing.assert_allclose(discrete_gradient(p4, np.full(4, 7.0)), 0)


def test_poincare(p4, ramp):
    assert poincare_constant(p4, 1.0, np.full(4, 3.0)) == 0
    c, ball = poincare_constant(p4, 1.0, ramp, with_witness=True)
    # ball (1, r=1): ⨍|f - f_B| = 2/3 and r ⨍|∇f| = 1
    assert c == pytest.approx(2 / 3)
    assert ball is not None


def test_space_and_field_roundtrip(tmp_path, cloud32):
    save_space(cloud32, tmp_path / "s.json")
    back = load_space(tmp_path / "s.json")
    np.testing.assert_allclose(back.dist, cloud32.dist, rtol=0, atol=1e-15)
    f = np.random.default_rng(0).standard_normal(cloud32.n)
    write_field(tmp_path / "f.csv", f)
    assert np.array_equal(read_field(tmp_path / "f.csv", cloud32.n), f)
    (tmp_path / "bad.csv").write_text("id,value\n0,1\n0,2\n")
    with pytest.raises(ValueError):
        read_field(tmp_path / "bad.csv", 2)
