import numpy as np
import pytest

from hsdecomp.whitney import C1, WhitneyError, cover_diagnostics, partition_of_unity, whitney_cover


def test_p4_hand_run(p4):
    cov = whitney_cover(p4, [1, 2])
    assert cov.centers.tolist() == [1, 2]
    np.testing.assert_allclose(cov.radii, [0.5, 0.5])
    assert [b.members.tolist() for b in cov.underlying] == [[1], [2]]
    assert cov.overlap == 1
    pu = partition_of_unity(p4, cov)
    np.testing.assert_allclose(pu.chi, [[0, 1, 0, 0], [0, 0, 1, 0]])
    assert C1 == 4


def test_empty_and_full(p4):
    cov = whitney_cover(p4, [])
    assert len(cov) == 0
    with pytest.raises(WhitneyError):
        partition_of_unity(p4, cov)
    with pytest.raises(WhitneyError):
        whitney_cover(p4, [0, 1, 2, 3])
    with pytest.raises((WhitneyError, ValueError)):
        whitney_cover(p4, [7])


def test_single_point_of_grid(grid4):
    cov = whitney_cover(grid4, [5])
    assert cov.centers.tolist() == [5]
    assert cov.radii[0] == pytest.approx(grid4.dist[5, [i for i in range(16) if i != 5]].min() / 2)
    np.testing.assert_allclose(partition_of_unity(grid4, cov).chi.sum(axis=0)[5], 1.0)


def test_cover_invariants_on_cloud(cloud32):
    rng = np.random.default_rng(3)
    for _ in range(5):
        omega = np.nonzero(rng.random(cloud32.n) < 0.6)[0]
        if len(omega) in (0, cloud32.n):
            continue
        cov = whitney_cover(cloud32, omega)
        diag = cover_diagnostics(cloud32, cov)
        assert diag["disjoint"] and diag["covers"] and diag["reaches_f"]
        F = np.setdiff1d(np.arange(cloud32.n), omega)
        np.testing.assert_allclose(cov.radii, cloud32.dist[np.ix_(cov.centers, F)].min(axis=1) / 2)
        chi = partition_of_unity(cloud32, cov).chi
        np.testing.assert_allclose(chi.sum(axis=0)[omega], 1.0, atol=1e-12)
        assert np.abs(chi[:, F]).max() <= 1e-12
