import numpy as np
import pytest

from hsdecomp.fields import make_field
from hsdecomp.hajlasz import hajlasz_norm_lp, mn_constant, pair_slack
from hsdecomp.maxfn import sobolev_sharp


def test_p4_value_and_certificate(p4, ramp):
    cert = hajlasz_norm_lp(p4, ramp)
    assert cert.value == pytest.approx(2.0, rel=1e-9)
    np.testing.assert_allclose(cert.g, 0.5, atol=1e-9)
    # the matching {0,1},{2,3} gives the dual bound 1 + 1
    assert cert.dual_bound == pytest.approx(2.0, rel=1e-9)
    assert cert.slack >= -1e-12
    assert set(cert.to_dict()) == {"value", "g", "slack", "dual_bound"}


def test_constant_field(p4):
    cert = hajlasz_norm_lp(p4, np.full(4, 3.0))
    assert cert.value == 0
    assert not np.any(cert.g)
    assert mn_constant(p4, np.full(4, 3.0)).value == 0


def test_scaling(cycle8):
    f = make_field(cycle8, "bump(2)")
    a, b = hajlasz_norm_lp(cycle8, f), hajlasz_norm_lp(cycle8, 2 * f)
    assert b.value == pytest.approx(2 * a.value, rel=1e-8)
    assert mn_constant(cycle8, 5 * f).value == pytest.approx(mn_constant(cycle8, f).value, rel=1e-12)


def test_certificate_and_duality_on_cloud(cloud32):
    f = make_field(cloud32, "random-lipschitz(seed=4)")
    cert = hajlasz_norm_lp(cloud32, f)
    assert pair_slack(cloud32, f, cert.g) >= -1e-12
    assert cert.dual_bound <= cert.value * (1 + 1e-12)
    assert cert.dual_bound >= cert.value * (1 - 1e-6)


def test_p4_mn_constant(p4, ramp):
    res = mn_constant(p4, ramp)
    # every pair: |i-j| / (|i-j| (2/3 + 2/3)) = 3/4
    assert res.value == pytest.approx(0.75, rel=1e-12)
    nf1 = float(np.dot(sobolev_sharp(p4, ramp), p4.measure))
    assert hajlasz_norm_lp(p4, ramp).value <= 2 * res.value * nf1 * (1 + 1e-9)


def test_pair_slack_detects_violation(p4, ramp):
    assert pair_slack(p4, ramp, np.full(4, 0.5)) == pytest.approx(0.0, abs=1e-15)
    assert pair_slack(p4, ramp, np.full(4, 0.4)) < 0
