"""Feature building, logistic regression, and cross-validation tests."""

import numpy as np
import pytest
import scipy.sparse as sp

from newslens.classify import (
    CellModel,
    Vocabulary,
    VocabularyMismatchError,
    build_vocabulary,
    cross_validate,
    f1_score,
    featurize,
    featurize_batch,
    fit_logistic,
    logistic_gradient,
    logistic_loss,
    precision_score,
    recall_score,
    refine_members,
    stratified_folds,
    train_cell,
)
from newslens.corpus import PhraseVector


def pv(counts):
    return PhraseVector.from_counts(counts)


class TestVocabulary:
    def test_build_sorted_with_min_df(self):
        pvs = [pv({"b": 1, "a": 2}), pv({"a": 1, "c": 1}), pv({"a": 3})]
        assert build_vocabulary(pvs).words == ("a", "b", "c")
        assert build_vocabulary(pvs, min_df=2).words == ("a",)

    def test_df_counts_segments_not_occurrences(self):
        pvs = [pv({"a": 10}), pv({"b": 1}), pv({"b": 1})]
        assert build_vocabulary(pvs, min_df=2).words == ("b",)

    def test_hash_tracks_content(self):
        assert Vocabulary(["a", "b"]).hash == Vocabulary(["a", "b"]).hash
        assert Vocabulary(["a", "b"]).hash != Vocabulary(["a", "c"]).hash

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(["a", "a"])


class TestFeaturize:
    def test_frequencies_restricted_to_vocab(self):
        vocab = Vocabulary(["a", "c"])
        x = featurize(pv({"a": 2, "b": 1, "c": 1}), vocab)
        np.testing.assert_allclose(x, [0.5, 0.25])

    def test_row_sums_to_one_when_nothing_dropped(self):
        vocab = Vocabulary(["a", "b"])
        x = featurize(pv({"a": 3, "b": 1}), vocab)
        assert x.sum() == pytest.approx(1.0)

    def test_empty_vector_is_zero_row(self):
        assert featurize(pv({}), Vocabulary(["a"])).sum() == 0.0

    def test_batch_matches_single(self):
        vocab = Vocabulary(["a", "b", "c"])
        pvs = [pv({"a": 2, "b": 1}), pv({}), pv({"c": 5, "zz": 5})]
        X = featurize_batch(pvs, vocab)
        assert X.shape == (3, 3)
        for i in range(3):
            np.testing.assert_allclose(X[i].toarray().ravel(), featurize(pvs[i], vocab))


class TestLogistic:
    def random_instance(self, rng, n=30, d=8):
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.5).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        lam = float(rng.uniform(0.0, 1.0))
        return X, y, w, b, lam

    def numeric_gradient(self, w, b, X, y, lam, h=1e-6):
        gw = np.zeros_like(w)
        for j in range(w.size):
            e = np.zeros_like(w)
            e[j] = h
            gw[j] = (logistic_loss(w + e, b, X, y, lam)
                     - logistic_loss(w - e, b, X, y, lam)) / (2 * h)
        gb = (logistic_loss(w, b + h, X, y, lam)
              - logistic_loss(w, b - h, X, y, lam)) / (2 * h)
        return gw, gb

    def test_loss_at_origin_is_log2(self):
        X = np.ones((4, 2))
        y = np.array([0.0, 1.0, 0.0, 1.0])
        assert logistic_loss(np.zeros(2), 0.0, X, y, 0.5) == pytest.approx(np.log(2))

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            X, y, w, b, lam = self.random_instance(rng)
            gw, gb = logistic_gradient(w, b, X, y, lam)
            nw, nb = self.numeric_gradient(w, b, X, y, lam)
            np.testing.assert_allclose(gw, nw, rtol=1e-6, atol=1e-9)
            assert gb == pytest.approx(nb, rel=1e-6, abs=1e-9)

    def test_gradient_with_sparse_features(self):
        rng = np.random.default_rng(3)
        X = sp.random(20, 6, density=0.3, random_state=3, format="csr")
        y = (rng.random(20) < 0.5).astype(float)
        w = rng.normal(size=6)
        gw, gb = logistic_gradient(w, 0.1, X, y, 0.2)
        nw, nb = self.numeric_gradient(w, 0.1, X.toarray(), y, 0.2)
        np.testing.assert_allclose(gw, nw, rtol=1e-6, atol=1e-9)

    def test_separable_data_classified_perfectly(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(-2, 0.3, size=(30, 2)), rng.normal(2, 0.3, size=(30, 2))])
        y = np.repeat([0.0, 1.0], 30)
        model = fit_logistic(sp.csr_matrix(X), y, lam=1e-3)
        assert f1_score(y, model.predict(sp.csr_matrix(X))) == 1.0

    def test_descent_reduces_loss(self):
        rng = np.random.default_rng(1)
        X, y, _, _, lam = self.random_instance(rng, n=50)
        model = fit_logistic(X, y, lam)
        assert logistic_loss(model.weights, model.bias, X, y, lam) < np.log(2)

    def test_stronger_penalty_shrinks_weights(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] > 0).astype(float)
        small = fit_logistic(X, y, lam=1e-4)
        large = fit_logistic(X, y, lam=10.0)
        assert np.linalg.norm(large.weights) < np.linalg.norm(small.weights)

    def test_nonbinary_labels_rejected(self):
        with pytest.raises(ValueError, match="0/1"):
            fit_logistic(np.ones((2, 1)), np.array([0.0, 2.0]), 0.1)


class TestScores:
    def test_hand_values(self):
        y = np.array([1, 1, 0, 0, 1], dtype=bool)
        p = np.array([1, 0, 1, 0, 1], dtype=bool)
        assert precision_score(y, p) == pytest.approx(2 / 3)
        assert recall_score(y, p) == pytest.approx(2 / 3)
        assert f1_score(y, p) == pytest.approx(2 / 3)

    def test_degenerate_cases_are_zero(self):
        empty = np.zeros(3, dtype=bool)
        assert precision_score(np.ones(3, dtype=bool), empty) == 0.0
        assert recall_score(empty, np.ones(3, dtype=bool)) == 0.0
        assert f1_score(empty, empty) == 0.0


class TestFolds:
    def test_partition_exact_and_balanced(self):
        y = np.array([0] * 23 + [1] * 17)
        folds = stratified_folds(y, n_folds=5, seed=0)
        assert folds.min() >= 0 and folds.max() < 5
        sizes = np.bincount(folds, minlength=5)
        assert sizes.sum() == 40
        assert sizes.max() - sizes.min() <= 1
        for label in (0, 1):
            per_class = np.bincount(folds[y == label], minlength=5)
            assert per_class.max() - per_class.min() <= 1

    def test_balanced_even_with_many_classes(self):
        rng = np.random.default_rng(5)
        y = rng.integers(0, 7, size=83)
        folds = stratified_folds(y, n_folds=5, seed=1)
        sizes = np.bincount(folds, minlength=5)
        assert sizes.max() - sizes.min() <= 1

    def test_deterministic_per_seed(self):
        y = np.array([0, 1] * 20)
        a = stratified_folds(y, seed=7)
        b = stratified_folds(y, seed=7)
        c = stratified_folds(y, seed=8)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_rejects_single_fold(self):
        with pytest.raises(ValueError):
            stratified_folds(np.array([0, 1]), n_folds=1)


class TestCrossValidation:
    def separable(self, n=60, seed=0):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(-1.5, 0.4, size=(n // 2, 3)),
                       rng.normal(1.5, 0.4, size=(n // 2, 3))])
        y = np.repeat([0.0, 1.0], n // 2)
        return sp.csr_matrix(X), y

    def test_easy_data_scores_high(self):
        X, y = self.separable()
        cv = cross_validate(X, y, l2_grid=(1e-3, 1e-1), seed=0)
        assert cv.mean_f1 > 0.95
        assert set(cv.grid_mean_f1) == {1e-3, 1e-1}

    def test_tie_breaks_toward_stronger_penalty(self):
        X, y = self.separable()
        cv = cross_validate(X, y, l2_grid=(1e-4, 1e-3), seed=0)
        if cv.grid_mean_f1[1e-4] == cv.grid_mean_f1[1e-3]:
            assert cv.lam == 1e-3

    def test_shuffled_labels_score_poorly(self):
        X, y = self.separable(n=80)
        rng = np.random.default_rng(11)
        y_perm = rng.permutation(y)
        cv_true = cross_validate(X, y, l2_grid=(1e-2,), seed=0)
        cv_perm = cross_validate(X, y_perm, l2_grid=(1e-2,), seed=0)
        assert cv_perm.mean_f1 < cv_true.mean_f1 - 0.2

    def test_train_cell_and_refine(self):
        X, y = self.separable()
        vocab = Vocabulary([f"w{i}" for i in range(X.shape[1])])
        cell = train_cell("guns", "CNN", X, y, vocab, l2_grid=(1e-3,), seed=0)
        assert cell.n_positive == 30 and cell.n_negative == 30
        assert cell.cv.mean_precision > 0.9
        members = [f"s{i}" for i in range(X.shape[0])]
        kept = refine_members(cell, members, X, vocab.hash)
        assert set(kept) == {f"s{i}" for i in range(30, 60)}

    def test_vocab_hash_mismatch_refused(self):
        X, y = self.separable()
        vocab = Vocabulary([f"w{i}" for i in range(X.shape[1])])
        cell = train_cell("guns", "CNN", X, y, vocab, l2_grid=(1e-3,))
        with pytest.raises(VocabularyMismatchError):
            cell.predict(X, "deadbeef")

    def test_single_class_cell_rejected(self):
        X, _ = self.separable()
        vocab = Vocabulary([f"w{i}" for i in range(X.shape[1])])
        with pytest.raises(ValueError, match="both positive and negative"):
            train_cell("guns", "CNN", X, np.ones(X.shape[0]), vocab)
