"""Leave-out measurement of how sharply phrase choice separates two groups.

Given two groups of segments (source and target), the measure asks: how
well does a segment's own phrasing identify which group it came from?
Each segment is scored by its phrase frequencies against a posterior
computed from the *rest* of the corpus (its own counts removed), which
kills the mechanical upward bias of the plug-in version: under no real
difference, the leave-out estimate sits at one half, while the plug-in
estimate drifts up just because each segment is compared against totals
that still contain it.

Score of a source segment:  sum_p qhat_i[p] * rho_minus_i[p]
Score of a target segment:  sum_p qhat_i[p] * (1 - rho_minus_i[p])

where qhat_i = counts_i / m_i and rho_minus_i[p] is the share of the
remaining occurrences of p that belong to the source group. The estimate
is the average of the two group means, so it lives in [0, 1], equals 1/2
in expectation for indistinguishable groups, and approaches 1 for fully
distinct language.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import PhraseVector

ZERO_DIVISION_MODES = ("neutral", "drop")


@dataclass(frozen=True)
class PhraseScore:
    phrase: str
    rho: float
    source_score: float  # rho - 1/2: positive means source-leaning
    target_score: float  # 1/2 - rho: positive means target-leaning
    count_source: int
    count_target: int


def _group_matrix(
    pvs: Sequence[PhraseVector], index: dict[str, int]
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Counts matrix and per-segment totals, empty segments dropped."""
    rows, cols, vals, totals = [], [], [], []
    r = 0
    for pv in pvs:
        if pv.total == 0:
            continue
        for phrase, count in pv.counts.items():
            rows.append(r)
            cols.append(index[phrase])
            vals.append(float(count))
        totals.append(float(pv.total))
        r += 1
    mat = sp.csr_matrix(
        (np.asarray(vals), (rows, cols)), shape=(r, len(index))
    )
    return mat, np.asarray(totals)


def _prepare(
    source: Sequence[PhraseVector], target: Sequence[PhraseVector]
) -> tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray, np.ndarray, list[str]]:
    phrases = sorted(
        {p for pv in source for p in pv.counts} | {p for pv in target for p in pv.counts}
    )
    index = {p: j for j, p in enumerate(phrases)}
    ms, m_s = _group_matrix(source, index)
    mt, m_t = _group_matrix(target, index)
    if ms.shape[0] == 0:
        raise ValueError("source group has no non-empty segments")
    if mt.shape[0] == 0:
        raise ValueError("target group has no non-empty segments")
    return ms, mt, m_s, m_t, phrases


def _half_estimate(
    own: sp.csr_matrix,
    m_own: np.ndarray,
    own_totals: np.ndarray,
    other_totals: np.ndarray,
    zero_division: str,
) -> float:
    """Mean over the group of sum_p qhat_i[p] * posterior_minus_i[p].

    The posterior for a segment's phrase is computed with that segment's
    counts removed from its own group's totals; the other group's totals
    are untouched. Written once and reused for both groups with the roles
    swapped, so swapping source and target flips the estimate's halves
    through the exact same float operations.
    """
    coo = own.tocoo()
    c = coo.data
    own_minus = own_totals[coo.col] - c
    denom = own_minus + other_totals[coo.col]
    lone = denom == 0.0  # phrase occurs in this segment only
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(lone, 0.5, own_minus / np.where(lone, 1.0, denom))
    if zero_division == "drop":
        keep = ~lone
        seg_sum = np.bincount(coo.row[keep], weights=(c * post)[keep], minlength=own.shape[0])
        m_eff = np.bincount(coo.row[keep], weights=c[keep], minlength=own.shape[0])
        alive = m_eff > 0
        if not alive.any():
            raise ValueError("every phrase was segment-unique; nothing to estimate")
        return float(np.mean(seg_sum[alive] / m_eff[alive]))
    seg_sum = np.bincount(coo.row, weights=c * post, minlength=own.shape[0])
    return float(np.mean(seg_sum / m_own))


def leave_out_estimate(
    source: Sequence[PhraseVector],
    target: Sequence[PhraseVector],
    zero_division: str = "neutral",
) -> float:
    """Leave-out polarization of two segment groups.

    ``zero_division`` controls phrases that occur in a single segment of
    the corpus, whose leave-out posterior is 0/0: "neutral" scores them
    1/2, "drop" removes them from that segment and renormalizes it.
    """
    if zero_division not in ZERO_DIVISION_MODES:
        raise ValueError(f"zero_division must be one of {ZERO_DIVISION_MODES}")
    ms, mt, m_s, m_t, _ = _prepare(source, target)
    totals_s = np.asarray(ms.sum(axis=0)).ravel()
    totals_t = np.asarray(mt.sum(axis=0)).ravel()
    half_s = _half_estimate(ms, m_s, totals_s, totals_t, zero_division)
    half_t = _half_estimate(mt, m_t, totals_t, totals_s, zero_division)
    return 0.5 * half_s + 0.5 * half_t


def plug_in_estimate(
    source: Sequence[PhraseVector],
    target: Sequence[PhraseVector],
) -> float:
    """Same functional with each segment's counts left in the totals.

    Upward-biased in finite samples (0.5 exactly only for mirror-image
    corpora); kept as the comparison baseline.
    """
    ms, mt, m_s, m_t, _ = _prepare(source, target)
    totals_s = np.asarray(ms.sum(axis=0)).ravel()
    totals_t = np.asarray(mt.sum(axis=0)).ravel()
    # every indexed phrase occurs in some segment, so the denominator is
    # positive; each side uses its own ratio so that swapping the groups
    # runs the identical float operations
    denom = totals_s + totals_t
    score_s = np.asarray(ms @ (totals_s / denom)).ravel() / m_s
    score_t = np.asarray(mt @ (totals_t / denom)).ravel() / m_t
    return 0.5 * float(np.mean(score_s)) + 0.5 * float(np.mean(score_t))


def rho(
    source: Sequence[PhraseVector],
    target: Sequence[PhraseVector],
) -> dict[str, float]:
    """Posterior that a phrase occurrence is source speech, from normalized
    group frequencies: rho[p] = qs[p] / (qs[p] + qt[p]) with
    qG[p] = (group count of p) / (group total of all phrases)."""
    ms, mt, m_s, m_t, phrases = _prepare(source, target)
    qs = np.asarray(ms.sum(axis=0)).ravel() / m_s.sum()
    qt = np.asarray(mt.sum(axis=0)).ravel() / m_t.sum()
    denom = qs + qt
    vals = qs / denom  # every indexed phrase occurs somewhere, denom > 0
    return {p: float(v) for p, v in zip(phrases, vals)}


def partisan_scores(
    source: Sequence[PhraseVector],
    target: Sequence[PhraseVector],
) -> list[PhraseScore]:
    """Per-phrase diagnosticity in both orientations, most diagnostic first."""
    ms, mt, _, _, phrases = _prepare(source, target)
    totals_s = np.asarray(ms.sum(axis=0)).ravel()
    totals_t = np.asarray(mt.sum(axis=0)).ravel()
    rho_map = rho(source, target)
    out = []
    for j, phrase in enumerate(phrases):
        r = rho_map[phrase]
        out.append(PhraseScore(
            phrase=phrase,
            rho=r,
            source_score=r - 0.5,
            target_score=0.5 - r,
            count_source=int(totals_s[j]),
            count_target=int(totals_t[j]),
        ))
    out.sort(key=lambda s: (-abs(s.rho - 0.5), s.phrase))
    return out
