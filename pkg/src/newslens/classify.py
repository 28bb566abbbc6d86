"""Supervised second-layer topic models trained on annotated segments.

One binary L2-regularized logistic regression is trained per
(topic, station) cell: positives are segments the annotators resolved to
the topic, negatives are that station's other resolved segments. Features
are the segment's phrase frequencies (counts over the segment's surviving
phrase total) restricted to a frozen vocabulary. The regularization
strength is chosen by stratified k-fold cross-validation on F1, then the
model is refit on all of the cell's data.

The optimizer is plain batch gradient descent with Armijo backtracking,
which is deterministic and exact enough for these small, well-conditioned
problems; training never depends on iteration-order randomness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .corpus import PhraseVector

DEFAULT_L2_GRID = tuple(float(x) for x in np.logspace(-4, 1, 6))
DEFAULT_FOLDS = 5
DECISION_THRESHOLD = 0.5


class VocabularyMismatchError(Exception):
    """Features were built against a different vocabulary than the model."""


class Vocabulary:
    """Frozen, ordered phrase vocabulary with a content hash."""

    def __init__(self, words: Sequence[str]):
        self.words: tuple[str, ...] = tuple(words)
        if len(set(self.words)) != len(self.words):
            raise ValueError("vocabulary contains duplicates")
        self._index = {w: i for i, w in enumerate(self.words)}
        self.hash = hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self.words)

    def index(self, word: str) -> int | None:
        return self._index.get(word)


def build_vocabulary(phrase_vectors: Iterable[PhraseVector], min_df: int = 1) -> Vocabulary:
    """All phrases appearing in at least ``min_df`` segments, sorted."""
    df: dict[str, int] = {}
    for pv in phrase_vectors:
        for phrase in pv.counts:
            df[phrase] = df.get(phrase, 0) + 1
    return Vocabulary(sorted(w for w, c in df.items() if c >= min_df))


def featurize(pv: PhraseVector, vocab: Vocabulary) -> np.ndarray:
    """Phrase frequencies restricted to the vocabulary; zero row if empty.

    Dividing by the segment's full phrase total before restricting keeps
    rows comparable across segments: the row sums to 1 exactly when every
    phrase is in the vocabulary, less when some fall outside.
    """
    x = np.zeros(len(vocab))
    if pv.total == 0:
        return x
    for phrase, count in pv.counts.items():
        j = vocab.index(phrase)
        if j is not None:
            x[j] = count / pv.total
    return x


def featurize_batch(pvs: Sequence[PhraseVector], vocab: Vocabulary) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for i, pv in enumerate(pvs):
        if pv.total == 0:
            continue
        for phrase, count in pv.counts.items():
            j = vocab.index(phrase)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(count / pv.total)
    return sp.csr_matrix(
        (np.asarray(vals), (rows, cols)), shape=(len(pvs), len(vocab))
    )


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def logistic_loss(w: np.ndarray, b: float, X, y: np.ndarray, lam: float) -> float:
    """Mean log-loss plus (lam/2)||w||^2; the intercept is unpenalized."""
    z = np.asarray(X @ w).ravel() + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * (w @ w))


def logistic_gradient(
    w: np.ndarray, b: float, X, y: np.ndarray, lam: float
) -> tuple[np.ndarray, float]:
    z = np.asarray(X @ w).ravel() + b
    r = (expit(z) - y) / y.size
    grad_w = np.asarray(X.T @ r).ravel() + lam * w
    return grad_w, float(r.sum())


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    lam: float
    n_iter: int

    def predict_proba(self, X) -> np.ndarray:
        return expit(np.asarray(X @ self.weights).ravel() + self.bias)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X) >= DECISION_THRESHOLD


def fit_logistic(
    X,
    y: np.ndarray,
    lam: float,
    max_iter: int = 500,
    tol: float = 1e-10,
    c1: float = 1e-4,
) -> LogisticModel:
    """Batch gradient descent with Armijo backtracking line search.

    The step is halved until the sufficient-decrease condition holds, then
    allowed to grow again, so no learning-rate tuning is needed. Stops when
    the gradient vanishes or the loss stops improving relatively.
    """
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be 0/1")
    w = np.zeros(X.shape[1])
    b = 0.0
    loss = logistic_loss(w, b, X, y, lam)
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad_w, grad_b = logistic_gradient(w, b, X, y, lam)
        gnorm2 = float(grad_w @ grad_w) + grad_b * grad_b
        if np.sqrt(gnorm2) < tol:
            break
        t = step
        while True:
            w_new = w - t * grad_w
            b_new = b - t * grad_b
            loss_new = logistic_loss(w_new, b_new, X, y, lam)
            if loss_new <= loss - c1 * t * gnorm2 or t < 1e-14:
                break
            t *= 0.5
        w, b = w_new, b_new
        step = min(t * 2.0, 1e4)
        if loss - loss_new <= tol * max(1.0, abs(loss)):
            loss = loss_new
            break
        loss = loss_new
    return LogisticModel(weights=w, bias=b, lam=lam, n_iter=it)


# ---------------------------------------------------------------------------
# Evaluation and cross-validation
# ---------------------------------------------------------------------------

def precision_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    predicted = int(y_pred.sum())
    if predicted == 0:
        return 0.0
    return float((y_true & y_pred).sum() / predicted)


def recall_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    actual = int(y_true.sum())
    if actual == 0:
        return 0.0
    return float((y_true & y_pred).sum() / actual)


def f1_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    tp = int((y_true & y_pred).sum())
    denom = 2 * tp + int((~y_true & y_pred).sum()) + int((y_true & ~y_pred).sum())
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def stratified_folds(y: np.ndarray, n_folds: int = DEFAULT_FOLDS, seed: int = 0) -> np.ndarray:
    """Assign each instance to a fold, balancing folds within every class.

    Classes are processed in sorted label order; each class's shuffled
    members go to the currently least-loaded folds, so per-class fold
    counts differ by at most one and so do total fold sizes.
    """
    y = np.asarray(y)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    assignment = np.full(y.shape[0], -1, dtype=np.int64)
    loads = np.zeros(n_folds, dtype=np.int64)
    for label in sorted(np.unique(y).tolist()):
        members = np.flatnonzero(y == label)
        rng.shuffle(members)
        order = np.lexsort((np.arange(n_folds), loads))
        for j, idx in enumerate(members):
            assignment[idx] = order[j % n_folds]
        loads += np.bincount(assignment[members], minlength=n_folds)
    return assignment


@dataclass(frozen=True)
class CVResult:
    lam: float
    mean_f1: float
    sd_f1: float
    mean_precision: float
    sd_precision: float
    grid_mean_f1: Mapping[float, float]


def cross_validate(
    X,
    y: np.ndarray,
    l2_grid: Sequence[float] = DEFAULT_L2_GRID,
    n_folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    max_iter: int = 500,
) -> CVResult:
    """Pick the strongest-regularized lambda with the best mean held-out F1.

    Held-out precision at the selected lambda is reported alongside, since
    dictionary refinement consumes the positive predictions.
    """
    y = np.asarray(y, dtype=np.float64)
    folds = stratified_folds(y, n_folds=n_folds, seed=seed)
    scores: dict[float, list[float]] = {lam: [] for lam in l2_grid}
    precisions: dict[float, list[float]] = {lam: [] for lam in l2_grid}
    for fold in range(n_folds):
        train = folds != fold
        test = ~train
        if y[test].size == 0 or np.unique(y[train]).size < 2:
            continue
        for lam in l2_grid:
            model = fit_logistic(X[train], y[train], lam, max_iter=max_iter)
            pred = model.predict(X[test])
            scores[lam].append(f1_score(y[test], pred))
            precisions[lam].append(precision_score(y[test], pred))
    means = {lam: float(np.mean(v)) if v else 0.0 for lam, v in scores.items()}
    best = max(l2_grid, key=lambda lam: (means[lam], lam))
    sel_f1 = scores[best] or [0.0]
    sel_prec = precisions[best] or [0.0]
    return CVResult(
        lam=best,
        mean_f1=float(np.mean(sel_f1)),
        sd_f1=float(np.std(sel_f1)),
        mean_precision=float(np.mean(sel_prec)),
        sd_precision=float(np.std(sel_prec)),
        grid_mean_f1=means,
    )


@dataclass(frozen=True)
class CellModel:
    """Trained topic model for one (topic, station) cell."""

    topic_id: str
    station: str
    model: LogisticModel
    vocab_hash: str
    cv: CVResult
    n_positive: int
    n_negative: int

    def predict(self, X, vocab_hash: str) -> np.ndarray:
        if vocab_hash != self.vocab_hash:
            raise VocabularyMismatchError(
                f"model for ({self.topic_id}, {self.station}) was trained on a "
                "different vocabulary"
            )
        return self.model.predict(X)

    def predict_proba(self, X, vocab_hash: str) -> np.ndarray:
        if vocab_hash != self.vocab_hash:
            raise VocabularyMismatchError(
                f"model for ({self.topic_id}, {self.station}) was trained on a "
                "different vocabulary"
            )
        return self.model.predict_proba(X)


def train_cell(
    topic_id: str,
    station: str,
    X,
    y: np.ndarray,
    vocab: Vocabulary,
    l2_grid: Sequence[float] = DEFAULT_L2_GRID,
    n_folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    max_iter: int = 500,
) -> CellModel:
    """Cross-validate, then refit on everything at the selected lambda."""
    y = np.asarray(y, dtype=np.float64)
    if np.unique(y).size < 2:
        raise ValueError(
            f"cell ({topic_id}, {station}) needs both positive and negative examples"
        )
    cv = cross_validate(X, y, l2_grid=l2_grid, n_folds=n_folds, seed=seed, max_iter=max_iter)
    model = fit_logistic(X, y, cv.lam, max_iter=max_iter)
    return CellModel(
        topic_id=topic_id,
        station=station,
        model=model,
        vocab_hash=vocab.hash,
        cv=cv,
        n_positive=int(y.sum()),
        n_negative=int((1 - y).sum()),
    )


def refine_members(
    cell: CellModel,
    member_ids: Sequence[str],
    X,
    vocab_hash: str,
) -> list[str]:
    """Keep the weakly labeled members the supervised model also accepts."""
    if X.shape[0] != len(member_ids):
        raise ValueError("feature matrix and member list disagree")
    keep = cell.predict(X, vocab_hash)
    return [sid for sid, k in zip(member_ids, keep) if k]


def precision_summary(cells: Iterable[CellModel]) -> tuple[float, float]:
    """Mean and standard deviation of held-out precision across cells."""
    vals = np.array([c.cv.mean_precision for c in cells])
    if vals.size == 0:
        return 0.0, 0.0
    return float(vals.mean()), float(vals.std())
