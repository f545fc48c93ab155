import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from v2vbeam import metrics, phy
from v2vbeam.errors import InputError


@pytest.fixture(scope="module")
def ring():
    return phy.build_dft_codebook().ring_positions()


def test_top_k_trivial_cases():
    preds = [[3, 1, 2], [0, 5, 6]]
    assert metrics.top_k_accuracy(preds, [2, 6]) == 1.0
    assert metrics.top_k_accuracy(preds, [2, 6], k=1) == 0.0
    assert metrics.top_k_accuracy(preds, [3, 6], k=1) == 0.5
    assert metrics.top_k_accuracy(np.array(preds), np.array([3, 6]), k=1) == 0.5
    with pytest.raises(InputError):
        metrics.top_k_accuracy(np.zeros((0, 5)), np.array([]))
    with pytest.raises(InputError):
        metrics.top_k_accuracy(preds, [1])


def test_top_k_uniform_ranking_monte_carlo():
    rng = np.random.default_rng(2024)
    labels = rng.integers(0, 256, 10000).tolist()
    preds = [rng.permutation(256)[:5].tolist() for _ in range(10000)]
    assert metrics.top_k_accuracy(preds, labels, 5) == pytest.approx(5 / 256, abs=0.005)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_top_k_monotone_in_k(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 16, 30).tolist()
    preds = [rng.permutation(16).tolist() for _ in range(30)]
    accs = [metrics.top_k_accuracy(preds, labels, k) for k in range(1, 17)]
    assert all(a <= b for a, b in zip(accs, accs[1:]))
    assert accs[-1] == 1.0


def test_r_squared_cases():
    assert metrics.r_squared([1, 2, 4], [1, 2, 3]) == pytest.approx(0.5)
    t = np.array([[1.0, 5.0], [2.0, 3.0], [4.0, 0.0]])
    assert metrics.r_squared(t, t) == 1.0
    assert metrics.r_squared(np.tile(t.mean(axis=0), (3, 1)), t) == pytest.approx(0.0)
    assert metrics.r_squared_components([[1, 1], [2, 1]], [[1, 3], [2, 3]]) == [1.0, None]
    assert metrics.r_squared([1, 2], [3, 3]) is None
    with pytest.raises(InputError):
        metrics.r_squared([1, 2], [1, 2, 3])


def test_ring_distance_cases(ring):
    assert metrics.ring_distance(5, 5, ring) == 0
    inv = np.argsort(ring)  # ring position -> flat index
    assert metrics.ring_distance(inv[0], inv[255], ring) == 1
    assert metrics.ring_distance(inv[10], inv[138], ring) == 128


def test_ring_ranking_is_nearest_first(ring):
    center = 70
    ranked = metrics.ring_ranking(center, ring)
    assert ranked[0] == center and sorted(ranked) == list(range(256))
    d = [metrics.ring_distance(center, b, ring) for b in ranked]
    assert d == sorted(d)
    assert d[:5] == [0, 1, 1, 2, 2]


def test_bins():
    assert metrics.speed_bin(0.0) == "0-2" and metrics.speed_bin(3.9) == "2-4"
    assert metrics.object_bin(4.4) == "1-4" and metrics.object_bin(4.5) == "5-10"
    assert metrics.object_bin(21.0) == "21+"


def _records(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        label = int(rng.integers(0, 8))
        out.append({"label": label, "top5": rng.permutation(8)[:5].tolist(),
                    "beam_diff": int(rng.integers(0, 6)), "rel_speed": float(rng.uniform(0, 9)),
                    "obj_count": float(rng.uniform(1, 12))})
    return out


@pytest.mark.parametrize("kind", metrics.STRATA)
def test_strata_partition_the_samples(kind):
    recs = _records(300)
    rows = metrics.stratify(recs, kind)
    assert sum(r["count"] for r in rows) == 300
    for r in rows:
        if r["count"]:
            assert 0.0 <= r["top1"] <= r["top5"] <= 1.0


def test_single_bin_matches_global_accuracy():
    recs = _records(50)
    for r in recs:
        r["beam_diff"] = 0
    (row,) = metrics.stratify(recs, "beam_diff")
    labels = [r["label"] for r in recs]
    assert row["top5"] == metrics.top_k_accuracy([r["top5"] for r in recs], labels, 5)


def test_empty_bins_are_emitted():
    recs = _records(5)
    for r, d in zip(recs, (0, 0, 3, 3, 3)):
        r["beam_diff"] = d
    rows = metrics.stratify(recs, "beam_diff")
    assert [r["bin"] for r in rows] == ["0", "1", "2", "3"]
    assert rows[1] == {"bin": "1", "count": 0, "top1": None, "top5": None}
    objs = metrics.stratify(recs, "obj_count")
    assert [r["bin"] for r in objs] == ["1-4", "5-10", "11-20", "21+"]


def test_missing_beam_diff_excluded():
    recs = _records(4)
    recs[0]["beam_diff"] = None
    assert sum(r["count"] for r in metrics.stratify(recs, "beam_diff")) == 3
    assert sum(r["count"] for r in metrics.beam_diff_groups(recs)) == 3
    with pytest.raises(InputError):
        metrics.stratify(recs, "colour")


def test_speed_bins_cover_range():
    recs = _records(3)
    for r, s in zip(recs, (0.5, 7.0, 17.2)):
        r["rel_speed"] = s
    names = [r["bin"] for r in metrics.stratify(recs, "rel_speed")]
    assert names[0] == "0-2" and names[-1] == "16-18" and len(names) == 9
    assert math.isclose(sum(r["count"] for r in metrics.stratify(recs, "rel_speed")), 3)
