"""Station-level outcome measures: topic shares, coverage divergence,
audience consumption, and series smoothing.

Topic shares are word-weighted: a station-day's share of topic z is the
fraction of that day's news words spoken in segments carrying z. Coverage
divergence between two stations over a window is the mean absolute gap
between their within-window average shares across the topic list.
Consumption metrics weight a viewing panel: a panelist-month is an active
news consumer at thirty or more total news minutes, and belongs to a
station set's audience when that set's share of their news minutes clears
a majority threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Collection, Iterable, Mapping, Sequence

from .corpus import DEFAULT_STATIONS, Segment

ACTIVE_MINUTES = 30.0
MAJORITY_THRESHOLDS = (0.50, 0.75)

ERA_BOUNDS = (date(2016, 1, 1), date(2020, 1, 1))
ERA_NAMES = ("pre2016", "2016to2019", "2020on")


def era_of(day: date) -> str:
    if day < ERA_BOUNDS[0]:
        return ERA_NAMES[0]
    if day < ERA_BOUNDS[1]:
        return ERA_NAMES[1]
    return ERA_NAMES[2]


# ---------------------------------------------------------------------------
# Topic shares
# ---------------------------------------------------------------------------

def compute_daily_shares(
    segments: Sequence[Segment],
    segment_topics: Mapping[str, Collection[str]],
    topics: Sequence[str],
) -> dict[tuple[str, date], dict[str, float]]:
    """Word-share of each topic per station-day.

    Only station-days with any airing appear; a present day maps absent
    topics to an implicit zero. A segment carrying several topics counts
    its words toward each of them, while the denominator counts every
    word once, so shares need not sum to one.
    """
    wanted = set(topics)
    word_total: dict[tuple[str, date], int] = {}
    topic_words: dict[tuple[str, date], dict[str, int]] = {}
    for seg in segments:
        key = (seg.station, seg.air_date)
        word_total[key] = word_total.get(key, 0) + seg.word_count
        for z in segment_topics.get(seg.id, ()):
            if z in wanted:
                per = topic_words.setdefault(key, {})
                per[z] = per.get(z, 0) + seg.word_count
    return {
        key: {z: n / word_total[key] for z, n in sorted(topic_words.get(key, {}).items())}
        for key in word_total
    }


def window_mean_shares(
    daily: Mapping[tuple[str, date], Mapping[str, float]],
    station: str,
    days: Sequence[date],
    topics: Sequence[str],
) -> dict[str, float] | None:
    """Mean daily share per topic over the station's aired days in a window.

    Returns None when the station aired nothing in the window: a missing
    station-day carries no value, it is not a zero.
    """
    present = [daily[(station, d)] for d in days if (station, d) in daily]
    if not present:
        return None
    n = len(present)
    return {z: sum(shares.get(z, 0.0) for shares in present) / n for z in topics}


def divergence(
    mean_i: Mapping[str, float],
    mean_j: Mapping[str, float],
    topics: Sequence[str],
) -> float:
    """Mean absolute share gap across the topic list."""
    if not topics:
        raise ValueError("topic list is empty")
    return sum(abs(mean_i.get(z, 0.0) - mean_j.get(z, 0.0)) for z in topics) / len(topics)


def divergence_between(
    daily: Mapping[tuple[str, date], Mapping[str, float]],
    station_i: str,
    station_j: str,
    days: Sequence[date],
    topics: Sequence[str],
) -> float | None:
    """Window divergence of two stations; None unless both aired."""
    mean_i = window_mean_shares(daily, station_i, days, topics)
    mean_j = window_mean_shares(daily, station_j, days, topics)
    if mean_i is None or mean_j is None:
        return None
    return divergence(mean_i, mean_j, topics)


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------

def month_start(day: date) -> date:
    return day.replace(day=1)


def next_month(day: date) -> date:
    if day.month == 12:
        return date(day.year + 1, 1, 1)
    return date(day.year, day.month + 1, 1)


def iter_months(start: date, end: date) -> list[date]:
    """First-of-month dates for every month touching [start, end]."""
    if start > end:
        return []
    months = []
    cur = month_start(start)
    while cur <= end:
        months.append(cur)
        cur = next_month(cur)
    return months


def days_in_range(start: date, end_exclusive: date) -> list[date]:
    return [start + timedelta(days=i) for i in range((end_exclusive - start).days)]


# ---------------------------------------------------------------------------
# Consumption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PanelRow:
    panelist_id: str
    month: date  # first of month
    weight: float
    minutes: Mapping[str, float]  # station -> news minutes
    total_news_minutes: float | None = None  # all news sources, not just tracked
    total_tv_minutes: float | None = None

    def __post_init__(self) -> None:
        # totals default to the tracked diet when the source omits them
        if self.total_news_minutes is None:
            object.__setattr__(
                self, "total_news_minutes", sum(self.minutes.values())
            )
        if self.total_tv_minutes is None:
            object.__setattr__(self, "total_tv_minutes", self.total_news_minutes)

    def tracked_minutes(self) -> float:
        return sum(self.minutes.values())

    def is_active(self) -> bool:
        return self.total_news_minutes >= ACTIVE_MINUTES


@dataclass(frozen=True)
class PanelIssue:
    line_no: int
    message: str


def active_consumers(rows: Sequence[PanelRow]) -> float:
    """Weighted fraction of the panel at or above the active-minutes bar."""
    total = sum(r.weight for r in rows)
    if total == 0:
        raise ValueError("panel has zero total weight")
    return sum(r.weight for r in rows if r.is_active()) / total


def majority_share(
    rows: Sequence[PanelRow],
    station_set: Collection[str],
    threshold: float,
) -> float:
    """Weighted fraction whose news diet is majority inside the station set.

    Only active panelists qualify; the set's minutes must be at least
    ``threshold`` of the panelist's total news minutes (boundary included).
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    members = set(station_set)
    total = sum(r.weight for r in rows)
    if total == 0:
        raise ValueError("panel has zero total weight")
    hit = 0.0
    for r in rows:
        if not r.is_active():
            continue
        inside = sum(m for s, m in r.minutes.items() if s in members)
        if inside / r.total_news_minutes >= threshold:
            hit += r.weight
    return hit / total


def consumption_series(
    rows: Sequence[PanelRow],
    station_sets: Mapping[str, Collection[str]],
    thresholds: Sequence[float] = MAJORITY_THRESHOLDS,
) -> list[dict]:
    """Monthly active share plus majority shares per station set/threshold."""
    by_month: dict[date, list[PanelRow]] = {}
    for r in rows:
        by_month.setdefault(r.month, []).append(r)
    out = []
    for month in sorted(by_month):
        month_rows = by_month[month]
        entry: dict = {"month": month, "active": active_consumers(month_rows)}
        for name in sorted(station_sets):
            for thr in thresholds:
                entry[f"{name}_{int(round(thr * 100))}"] = majority_share(
                    month_rows, station_sets[name], thr
                )
        out.append(entry)
    return out


def read_panel(
    path: str | Path,
    stations: Sequence[str] = DEFAULT_STATIONS,
) -> tuple[list[PanelRow], list[PanelIssue]]:
    """Read panelist-month rows, rejecting invalid rows individually."""
    rows: list[PanelRow] = []
    issues: list[PanelIssue] = []
    known = set(stations)
    seen: set[tuple[str, date]] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                issues.append(PanelIssue(line_no, f"malformed record: {exc}"))
                continue
            try:
                pid = str(obj["panelist_id"])
                year, month = obj["month"].split("-")
                month_date = date(int(year), int(month), 1)
                weight = float(obj["weight"])
                minutes = {str(s): float(v) for s, v in obj["minutes"].items()}
                total_news = float(obj["total_news_minutes"])
                total_tv = float(obj["total_tv_minutes"])
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                issues.append(PanelIssue(line_no, f"bad panel row: {exc}"))
                continue
            if weight < 0:
                issues.append(PanelIssue(line_no, f"negative weight {weight}"))
                continue
            if weight == 0:
                issues.append(PanelIssue(line_no, "zero weight"))
                continue
            if any(v < 0 for v in minutes.values()):
                issues.append(PanelIssue(line_no, "negative minutes"))
                continue
            tracked = sum(minutes.values())
            if tracked > total_news + 1e-9:
                issues.append(PanelIssue(
                    line_no,
                    f"tracked minutes {tracked:g} exceed news total {total_news:g}",
                ))
                continue
            if total_news > total_tv + 1e-9:
                issues.append(PanelIssue(
                    line_no,
                    f"news minutes {total_news:g} exceed tv total {total_tv:g}",
                ))
                continue
            unknown = set(minutes) - known
            if unknown:
                issues.append(PanelIssue(
                    line_no, f"unknown stations: {', '.join(sorted(unknown))}"
                ))
                continue
            key = (pid, month_date)
            if key in seen:
                issues.append(PanelIssue(
                    line_no, f"duplicate panelist-month {pid} {obj['month']}"
                ))
                continue
            seen.add(key)
            rows.append(PanelRow(
                pid, month_date, weight, minutes, total_news, total_tv,
            ))
    return rows, issues


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------

def smooth(
    series: Sequence[tuple[date, float]],
    window: int,
) -> list[tuple[date, float]]:
    """Centered rolling mean over the values available in a day window.

    Each point averages the values whose dates fall within
    [d - (window-1)//2, d + window//2] days; missing dates simply
    contribute nothing, and edges average over what exists. Window 1 is
    the identity.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    pts = sorted(series)
    if len({d for d, _ in pts}) != len(pts):
        raise ValueError("series has duplicate dates")
    radius_left = (window - 1) // 2
    radius_right = window // 2
    out = []
    lo = 0
    hi = 0
    for d, _ in pts:
        start = d - timedelta(days=radius_left)
        end = d + timedelta(days=radius_right)
        while lo < len(pts) and pts[lo][0] < start:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < len(pts) and pts[hi][0] <= end:
            hi += 1
        vals = [v for _, v in pts[lo:hi]]
        out.append((d, sum(vals) / len(vals)))
    return out
