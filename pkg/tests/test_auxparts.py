import numpy as np
import pytest
from hypothesis import given, strategies as st

from auxpose.auxparts import (AuxiliaryPart, cluster_statistics, detections_from_map, disagreement, fuse,
                              log_likelihood, mean_offset, minmax_normalize, select_useful, smooth_votes,
                              vote_map, vote_sigmas)
from auxpose.classifiers import GridGeometry, ScoreMap
from auxpose.clustering import PartCluster
from auxpose.features import estimate_whitening_stats

from helpers import two_pass_statistics


def cluster(offsets):
    offsets = np.asarray(offsets, dtype=float)
    return PartCluster(np.arange(offsets.shape[0]), 0, offsets)


def aux(offsets, predictive=(True, False, False, False)):
    offsets = np.asarray(offsets, dtype=float)
    return AuxiliaryPart("aux/0", offsets, np.zeros(len(predictive)), tuple(predictive))


def test_mean_offset_and_disagreement_examples():
    same = cluster(np.tile([[10.0, -5.0]], (6, 4, 1)))
    assert mean_offset(same, 0).tolist() == [10.0, -5.0]
    assert disagreement(same, 2) == 0.0
    pair = np.zeros((2, 4, 2))
    pair[1, :, 0] = 2.0
    assert mean_offset(cluster(pair), 1).tolist() == [1.0, 0.0]
    assert disagreement(cluster(pair), 1) == 1.0
    with pytest.raises(ValueError):
        mean_offset(np.zeros((0, 4, 2)), 0)


def test_statistics_match_two_pass_oracle():
    rng = np.random.default_rng(13)
    for _ in range(200):
        off = rng.normal(0, rng.uniform(0.1, 30), size=(int(rng.integers(1, 40)), 4, 2))
        c = cluster(off)
        means, dis = two_pass_statistics(off)
        for i in range(4):
            assert np.max(np.abs(mean_offset(c, i) - means[i])) <= 1e-12
            assert abs(disagreement(c, i) - dis[i]) <= 1e-12
        m2, d2 = cluster_statistics(c)
        assert np.max(np.abs(m2 - means)) <= 1e-12 and np.max(np.abs(d2 - dis)) <= 1e-12


@given(st.integers(0, 10 ** 6), st.integers(1, 20))
def test_disagreement_nonnegative_zero_iff_identical(seed, k):
    rng = np.random.default_rng(seed)
    off = rng.integers(-3, 4, size=(k, 4, 2)).astype(float)
    for i in range(4):
        d = disagreement(off, i)
        assert d >= 0
        assert (d == 0) == bool(np.all(off[:, i] == off[0, i]))


@given(st.integers(0, 10 ** 6))
def test_disagreement_translation_invariant(seed):
    rng = np.random.default_rng(seed)
    k = 7
    centres = rng.uniform(0, 500, size=(k, 2))
    landmarks = rng.uniform(0, 500, size=(k, 4, 2))
    shift = rng.uniform(-100, 100, size=(k, 1, 2))  # one vector per source image
    before = landmarks - centres[:, None]
    after = (landmarks + shift) - (centres[:, None] + shift)
    for i in range(4):
        assert disagreement(after, i) == pytest.approx(disagreement(before, i), abs=1e-9)


def test_select_useful_examples():
    far = cluster(np.random.default_rng(0).normal(0, 50, size=(5, 4, 2)))
    assert select_useful([far], 1.0)[0] == []
    off = np.random.default_rng(1).normal(0, 50, size=(5, 4, 2))
    off[:, 0] = (3.0, 4.0)
    parts, _ = select_useful([far, cluster(off)], 1.0)
    assert len(parts) == 1 and parts[0].predictive[0] and parts[0].detector_id == "aux/1"
    with pytest.raises(ValueError):
        select_useful([far], 0.0)


def test_select_useful_predicate_oracle_and_monotone():
    rng = np.random.default_rng(2)
    clusters = [cluster(rng.normal(0, rng.uniform(0.5, 12), size=(6, 4, 2))) for _ in range(60)]
    taus = np.array([4.0, 5.0, 6.0, 7.0])
    parts, _ = select_useful(clusters, taus)
    expect = [f"aux/{k}" for k, c in enumerate(clusters) if np.any(cluster_statistics(c)[1] <= taus)]
    assert [p.detector_id for p in parts] == expect
    for p in parts:
        assert p.predictive == tuple(bool(v) for v in p.disagreements <= taus)
    bigger, _ = select_useful(clusters, taus + np.array([0, 3, 0, 1]))
    assert set(expect) <= {p.detector_id for p in bigger}


def test_select_useful_trains_detectors(rng):
    hog = rng.normal(size=(20, 6))
    stats = estimate_whitening_stats(rng.normal(size=(50, 6)))
    c = PartCluster(np.array([3, 5, 7]), 3, np.zeros((3, 4, 2)))
    parts, dets = select_useful([c], 6.0, hog=hog, stats=stats)
    assert list(dets) == ["aux/0"] and dets["aux/0"].n_positives == 3


def test_vote_map_examples():
    geo = GridGeometry(35, 35, 4)
    a = aux(np.array([[0.0, -40.0], [0, 0], [0, 0], [0, 0]]))
    v = vote_map([[100.0, 100.0]], [2.0], a, geo, 0.5)
    r, c = geo.nearest_cell(100.0, 60.0)
    assert v[0, r, c] == 2.0 and v.sum() == 2.0
    assert not vote_map([[100.0, 100.0]], [0.4], a, geo, 0.5).any()
    off = aux(np.array([[500.0, 0.0], [0, 0], [0, 0], [0, 0]]))
    assert not vote_map([[100.0, 100.0]], [3.0], off, geo, 0.5).any()
    with pytest.raises(ValueError):
        vote_map([[1.0, 1.0]], [np.nan], a, geo)


@given(st.integers(0, 10 ** 6))
def test_vote_mass_bookkeeping(seed):
    rng = np.random.default_rng(seed)
    geo = GridGeometry(10, 12, 4)
    a = AuxiliaryPart("x", rng.uniform(-30, 30, size=(4, 2)), np.zeros(4), tuple(rng.uniform(size=4) < 0.6))
    locs = rng.uniform(0, 100, size=(25, 2))
    scores = rng.normal(1.0, 1.5, size=25)
    v = vote_map(locs, scores, a, geo, 0.5)
    assert np.all(v >= 0)
    for part in range(4):
        expect = 0.0
        if a.predictive[part]:
            for (x, y), s in zip(locs, scores):
                r, c = geo.nearest_cell(x + a.mean_offsets[part, 0], y + a.mean_offsets[part, 1])
                if s > 0.5 and geo.contains(r, c):
                    expect += max(s, 0.0)
        assert v[part].sum() == pytest.approx(expect, abs=1e-9)


def test_detections_from_map():
    geo = GridGeometry(3, 4, 8)
    s = np.zeros((3, 4))
    s[1, 2] = 0.9
    locs, scores = detections_from_map(ScoreMap(s, geo), 0.5)
    assert locs.tolist() == [[48.0, 40.0]] and scores.tolist() == [0.9]


def test_fuse_examples(rng):
    u = rng.normal(size=(8, 9))
    votes = rng.uniform(size=(8, 9))
    assert np.array_equal(fuse(u, votes, 0.0), minmax_normalize(u))
    peak = np.zeros((8, 9))
    peak[5, 2] = 3.0
    out = fuse(u, peak, 1.0, sigma_px=4.0, stride=4)
    assert np.unravel_index(np.argmax(out), out.shape) == (5, 2)
    hand = 0.5 * (u - u.min()) / (u.max() - u.min()) + 0.5 * (votes - votes.min()) / (votes.max() - votes.min())
    np.testing.assert_allclose(fuse(u, votes, 0.5), hand, atol=1e-15)
    with pytest.raises(ValueError):
        fuse(u, votes[:, :5], 0.5)
    with pytest.raises(ValueError):
        fuse(u, votes, 1.5)


def test_minmax_and_smoothing():
    assert np.all(minmax_normalize(np.full((3, 3), 4.0)) == 0)
    v = np.zeros((25, 25))
    v[12, 12] = 1.0
    s = smooth_votes(v, 8.0, 4)  # two cells wide, kernel fully inside the grid
    assert s.sum() == pytest.approx(1.0, abs=1e-9) and np.argmax(s) == 12 * 25 + 12
    assert np.array_equal(smooth_votes(v, 0.0, 4), v)


@given(st.integers(0, 10 ** 6))
def test_fuse_zero_lambda_keeps_argmax(seed):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(6, 7))
    out = fuse(u, rng.uniform(size=(6, 7)), 0.0, 5.0, 4)
    assert np.argmax(out) == np.argmax(u)
    assert np.argmax(log_likelihood(out)) == np.argmax(u)


def test_vote_sigmas_and_log_likelihood():
    parts = [AuxiliaryPart("a", np.zeros((4, 2)), np.array([1.0, 5.0, 9.0, 0.0]), (True, True, False, False)),
             AuxiliaryPart("b", np.zeros((4, 2)), np.array([3.0, 7.0, 1.0, 0.0]), (True, True, True, False))]
    assert vote_sigmas(parts).tolist() == [2.0, 6.0, 2.0, 2.0]
    assert log_likelihood(np.array([0.0, 1.0])).tolist() == [np.log(1e-6), 0.0]
