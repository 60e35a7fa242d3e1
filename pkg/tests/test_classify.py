import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frdl.classify import (
    KNN, SOFTMAX, Gallery, KnnParams, build_gallery, knn_predict, route, softmax_decide,
)
from frdl.errors import ConfigError, DataError
from frdl.net import SequenceInput, init_params
from oracles import knn_oracle

TAU = KnnParams(k=10, margin_tau=0.15)


def test_softmax_decide_examples():
    assert softmax_decide([0.9, 0.05, 0.05], TAU) == 0
    assert softmax_decide([0.45, 0.40, 0.15], TAU) is None
    assert softmax_decide([0.5, 0.5], KnnParams(margin_tau=0.0)) == 0


def test_softmax_decide_rejects_unnormalised():
    with pytest.raises(ConfigError):
        softmax_decide([0.5, 0.6], TAU)
    with pytest.raises(ConfigError):
        softmax_decide([1.2, -0.2], TAU)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8).filter(lambda v: sum(v) > 0))
def test_tau_zero_never_ambiguous(v):
    p = np.array(v) / np.sum(v)
    assert softmax_decide(p, KnnParams(margin_tau=0.0)) == int(np.argmax(p))


def test_knn_params_validation():
    with pytest.raises(ConfigError):
        KnnParams(k=0)
    with pytest.raises(ConfigError):
        KnnParams(margin_tau=1.5)


def test_single_point_gallery():
    g = Gallery(np.array([[1.0, 2.0]]), [4])
    assert knn_predict(g, [9.0, -3.0], KnnParams(k=10)).label == 4


def test_exact_match_returns_its_label():
    g = Gallery(np.array([[0.0, 0.0], [1.0, 0.0], [1.1, 0.0], [0.9, 0.1]]), [2, 0, 0, 0])
    d = knn_predict(g, [0.0, 0.0], KnnParams(k=3))
    assert d.label == 2 and d.route == KNN
    assert d.neighbor_ids == [0]


def test_normaliser_is_next_neighbour():
    # k=2: neighbours at 1 (label 0) and 2 (label 1), normaliser 4
    g = Gallery(np.array([[1.0], [2.0], [4.0]]), [0, 1, 1])
    d = knn_predict(g, [0.0], KnnParams(k=2))
    assert d.label == 0  # weights 16 vs 4
    assert d.neighbor_ids == [0, 1]


def test_knn_errors():
    with pytest.raises(DataError):
        knn_predict(Gallery(np.zeros((0, 2)), []), [0.0, 0.0], TAU)
    with pytest.raises(DataError):
        knn_predict(Gallery(np.zeros((2, 2)), [0, 1]), [0.0], TAU)


def _random_gallery(rng, n_max=30, c_max=5, dim=None):
    n = int(rng.integers(1, n_max + 1))
    dim = dim or int(rng.integers(1, 5))
    return Gallery(rng.normal(size=(n, dim)), rng.integers(0, int(rng.integers(1, c_max + 1)), n))


@pytest.mark.parametrize("k", [1, 3, 10])
def test_knn_matches_oracle(k):
    rng = np.random.default_rng(k)
    for _ in range(100):
        g = _random_gallery(rng)
        q = rng.normal(size=g.dim)
        assert knn_predict(g, q, KnnParams(k=k)).label == knn_oracle(g.embeddings, g.labels, q, k)


def test_knn_matches_oracle_12_points_3_classes():
    rng = np.random.default_rng(0)
    for _ in range(100):
        g = Gallery(rng.normal(size=(12, 2)), rng.integers(0, 3, 12))
        q = rng.normal(size=2)
        assert knn_predict(g, q, KnnParams(k=3)).label == knn_oracle(g.embeddings, g.labels, q, 3)


@given(seed=st.integers(0, 100_000), k=st.sampled_from([1, 3, 10]))
def test_knn_permutation_invariant(seed, k):
    rng = np.random.default_rng(seed)
    g = _random_gallery(rng)
    q = rng.normal(size=g.dim)
    perm = rng.permutation(len(g))
    shuffled = Gallery(g.embeddings[perm], g.labels[perm])
    assert knn_predict(g, q, KnnParams(k=k)).label == knn_predict(shuffled, q, KnnParams(k=k)).label


def test_knn_permutation_invariant_with_ties():
    # equidistant neighbours of different classes: the rank order uses labels, not positions
    emb = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [3.0, 0.0]])
    labels = np.array([2, 1, 0, 1, 2])
    rng = np.random.default_rng(0)
    want = knn_predict(Gallery(emb, labels), [0.0, 0.0], KnnParams(k=3)).label
    for _ in range(20):
        p = rng.permutation(5)
        assert knn_predict(Gallery(emb[p], labels[p]), [0.0, 0.0], KnnParams(k=3)).label == want


@given(seed=st.integers(0, 100_000), scale=st.floats(0.01, 100))
def test_knn_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    g = _random_gallery(rng)
    q = rng.normal(size=g.dim)
    a = knn_predict(g, q, KnnParams(k=3)).label
    b = knn_predict(Gallery(g.embeddings * scale, g.labels), q * scale, KnnParams(k=3)).label
    if a != b:
        # only a floating-point tie between class totals may flip the vote
        assert knn_oracle(g.embeddings, g.labels, q, 3) == a


def test_route_prefers_confident_softmax():
    g = Gallery(np.array([[0.0], [1.0]]), [1, 1])
    d = route(np.array([0.8, 0.1, 0.1]), np.array([0.0]), g, TAU)
    assert (d.label, d.route) == (0, SOFTMAX)
    d = route(np.array([0.4, 0.35, 0.25]), np.array([0.0]), g, TAU)
    assert (d.label, d.route) == (1, KNN)
    assert d.neighbor_ids


def test_route_without_gallery_uses_argmax():
    d = route(np.array([0.3, 0.4, 0.3]), np.zeros(2), None, TAU)
    assert (d.label, d.route) == (1, SOFTMAX)


@given(seed=st.integers(0, 100_000))
def test_route_emits_one_valid_label(seed):
    rng = np.random.default_rng(seed)
    g = _random_gallery(rng, c_max=4, dim=3)
    p = rng.dirichlet(np.ones(4))
    d = route(p, rng.normal(size=3), g, TAU)
    assert isinstance(d.label, int) and 0 <= d.label < 4
    assert d.route in (SOFTMAX, KNN)


def test_gallery_tensor_round_trip():
    g = Gallery(np.random.default_rng(0).normal(size=(5, 3)).astype(np.float32), [0, 2, 1, 1, 0])
    back = Gallery.from_tensors(g.to_tensors())
    np.testing.assert_array_equal(back.embeddings, g.embeddings)
    np.testing.assert_array_equal(back.labels, g.labels)
    assert Gallery.from_tensors({}) is None


def test_build_gallery(tiny_config, rng):
    params = init_params(tiny_config, 0)
    inputs = [SequenceInput(rng.random((4, 8, 8)), rng.random((4, 5)), rng.random((3, 4, 3))) for _ in range(17)]
    inputs.append(inputs[0])
    labels = [i % 3 for i in range(18)]
    g = build_gallery(tiny_config, params, inputs, labels)
    assert len(g) == 18 and g.dim == tiny_config.embedding_dim
    assert g.labels.tolist() == labels
    np.testing.assert_array_equal(g.embeddings[0], g.embeddings[17])
    with pytest.raises(DataError):
        build_gallery(tiny_config, params, [], [])
