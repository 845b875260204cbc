import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from hsdecomp import atomic, czd
from hsdecomp.hajlasz import hajlasz_norm_lp, pair_slack
from hsdecomp.maxfn import calderon_star, discrete_convolution, grand_maximal, hl_maximal, sobolev_sharp
from hsdecomp.space import build_space
from hsdecomp.whitney import cover_diagnostics, partition_of_unity, whitney_cover

SPACES = {spec: build_space(spec) for spec in ("path(5,1.0)", "cycle(6)", "grid(3x3)", "cloud(12,seed=2)")}
PROFILE = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def space_and_field(draw, count=1):
    sp = SPACES[draw(st.sampled_from(sorted(SPACES)))]
    vals = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    fields = [np.array(draw(st.lists(vals, min_size=sp.n, max_size=sp.n))) for _ in range(count)]
    return (sp, *fields)


def _close(a, b, rel=1e-9):
    return np.all(np.abs(a - b) <= rel * max(1.0, np.abs(a).max(), np.abs(b).max()))


@PROFILE
@given(space_and_field(), st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3), st.floats(-20, 20))
def test_homogeneity_and_translation(data, a, c):
    sp, f = data
    for op in (sobolev_sharp, calderon_star, hl_maximal):
        assert _close(op(sp, a * f), abs(a) * op(sp, f))
    assert _close(sobolev_sharp(sp, f + c), sobolev_sharp(sp, f))
    assert _close(calderon_star(sp, f + c), calderon_star(sp, f))


@PROFILE
@given(space_and_field(count=2))
def test_sublinearity(data):
    sp, f, g = data
    for op in (sobolev_sharp, calderon_star, hl_maximal):
        assert np.all(op(sp, f + g) <= op(sp, f) + op(sp, g) + 1e-9 * (1 + np.abs(f).max() + np.abs(g).max()))


@PROFILE
@given(space_and_field())
def test_pointwise_orderings(data):
    sp, f = data
    nf, star = sobolev_sharp(sp, f), calderon_star(sp, f)
    assert np.all(nf <= 2 * star * (1 + 1e-12) + 1e-12)
    assert np.all(np.abs(f) <= hl_maximal(sp, f) + 1e-12)
    tent, exact = grand_maximal(sp, f, "tent"), grand_maximal(sp, f, "exact_lp")
    assert np.all(tent <= exact + 1e-9 * (1 + np.abs(f).max()))
    assert np.all(np.abs(f) <= exact + 1e-9 * (1 + np.abs(f).max()))


@PROFILE
@given(space_and_field())
def test_hajlasz_certificate(data):
    sp, f = data
    cert = hajlasz_norm_lp(sp, f)
    scale = np.abs(f).max() / sp.dist[np.triu_indices(sp.n, 1)].min()
    assert pair_slack(sp, f, cert.g) >= -1e-9 * max(scale, 1e-300)
    assert cert.dual_bound <= cert.value * (1 + 1e-9) + 1e-12


@PROFILE
@given(space_and_field(), st.floats(0.3, 3.0))
def test_convolution_partition(data, r):
    sp, f = data
    u, cover = discrete_convolution(sp, f, r)
    assert np.allclose(cover.weights.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(u >= f.min() - 1e-9) and np.all(u <= f.max() + 1e-9)


@PROFILE
@given(st.sampled_from(sorted(SPACES)), st.data())
def test_whitney_invariants(spec, data):
    sp = SPACES[spec]
    omega = data.draw(st.lists(st.integers(0, sp.n - 1), min_size=1, max_size=sp.n - 1, unique=True))
    cov = whitney_cover(sp, omega)
    diag = cover_diagnostics(sp, cov)
    assert diag["disjoint"] and diag["covers"] and diag["reaches_f"]
    chi = partition_of_unity(sp, cov).chi
    assert np.allclose(chi.sum(axis=0)[sorted(omega)], 1.0, atol=1e-12)


@PROFILE
@given(space_and_field(), st.floats(0.05, 0.95), st.sampled_from(czd.FLAVORS))
def test_cz_reconstruction(data, frac, flavor):
    sp, f = data
    q = czd.default_q(sp)
    lev = czd.level_data(sp, f, q, flavor)
    lo, hi = lev.level.min(), lev.level.max()
    if hi <= 0:
        return
    alpha = max(lo, 1e-12) + frac * (hi - max(lo, 1e-12))
    if not np.any(lev.level <= alpha):
        return
    dec = czd.cz_decompose(sp, f, q, alpha, flavor, lev)
    rep = czd.verify_cz(sp, dec)
    assert rep.residual <= 1e-9 * max(1.0, np.abs(f).max())
    assert rep.support_ok


@PROFILE
@given(space_and_field(), st.sampled_from(atomic.DECOMP_FLAVORS))
def test_atomic_reconstruction(data, flavor):
    sp, f = data
    dec = atomic.atomic_decompose(sp, f, flavor)
    rep = atomic.decomposition_report(sp, dec)
    assert rep["failed_atoms"] == []
    assert max(rep["reconstruction"].values()) <= 1e-9 * max(1.0, np.abs(f).max())
