"""Translation activity in exported pull-request / issue records.

Input is JSON lines, one record per line::

    {"repo": "o/r", "stars": 12000, "forks": 900, "kind": "pull_request",
     "title": "Translate README to German", "state": "merged",
     "created_at": "2023-10-02T12:00:00Z", "merged_at": "2023-10-05T08:00:00Z"}
"""
from __future__ import annotations

import csv
import io
import json
import re
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Iterator, Sequence, TextIO

KEYWORD = "translate readme"

SMALL_MIN_STARS = 100
MEDIUM_MIN_STARS = 5000
LARGE_ABOVE_STARS = 10000

HIGH_ADOPTION = 0.80
LOW_ADOPTION = 0.20


class ScaleBucket(str, Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class RecordError(ValueError):
    pass


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 to an aware UTC datetime; naive input is taken as UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class ActivityRecord:
    repo: str
    stars: int
    forks: int
    kind: str
    title: str
    state: str
    created_at: datetime
    merged_at: datetime | None = None

    def __post_init__(self):
        if self.kind not in ("pull_request", "issue"):
            raise RecordError(f"{self.repo}: kind must be pull_request or issue, got {self.kind!r}")
        if self.state not in ("merged", "closed", "open"):
            raise RecordError(f"{self.repo}: unknown state {self.state!r}")
        if (self.state == "merged") != (self.merged_at is not None):
            raise RecordError(f"{self.repo}: merged_at must be set exactly when state is merged")
        if self.stars < 0 or self.forks < 0:
            raise RecordError(f"{self.repo}: stars and forks must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ActivityRecord":
        try:
            merged = d.get("merged_at")
            return cls(
                repo=str(d["repo"]),
                stars=int(d["stars"]),
                forks=int(d.get("forks", 0)),
                kind=d["kind"],
                title=d["title"],
                state=d["state"],
                created_at=parse_timestamp(d["created_at"]),
                merged_at=parse_timestamp(merged) if merged else None,
            )
        except KeyError as exc:
            raise RecordError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, RecordError):
                raise
            raise RecordError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "repo": self.repo,
            "stars": self.stars,
            "forks": self.forks,
            "kind": self.kind,
            "title": self.title,
            "state": self.state,
            "created_at": self.created_at.isoformat(),
            "merged_at": self.merged_at.isoformat() if self.merged_at else None,
        }


def read_records(stream: TextIO, source: str = "<input>") -> Iterator[ActivityRecord]:
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            yield ActivityRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, RecordError) as exc:
            raise RecordError(f"{source}:{lineno}: {exc}") from None


def classify_scale(stars: int, forks: int = 0) -> ScaleBucket | None:
    """Star band of a repository; ``None`` below 100 stars (out of band).

    Forks are accepted for auditability but do not affect the band.
    """
    if stars > LARGE_ABOVE_STARS:
        return ScaleBucket.LARGE
    if stars >= MEDIUM_MIN_STARS:
        return ScaleBucket.MEDIUM
    if stars >= SMALL_MIN_STARS:
        return ScaleBucket.SMALL
    return None


def _normalize_title(title: str) -> str:
    return re.sub(r"\s+", " ", title).strip().casefold()


def filter_translation_records(records: Iterable[ActivityRecord]) -> list[ActivityRecord]:
    return [r for r in records if KEYWORD in _normalize_title(r.title)]


@dataclass
class MonthlyHistogram:
    n_prs: int
    counts: dict[int, int]
    shares: dict[int, float]

    @property
    def no_data(self) -> bool:
        return self.n_prs == 0

    def to_dict(self) -> dict:
        if self.no_data:
            return {"no_data": True, "n_prs": 0, "counts": {}, "shares": {}}
        return {
            "no_data": False,
            "n_prs": self.n_prs,
            "counts": {str(m): c for m, c in self.counts.items()},
            "shares": {str(m): round(s, 6) for m, s in self.shares.items()},
        }


def monthly_histogram(records: Iterable[ActivityRecord]) -> MonthlyHistogram:
    """Share of pull requests opened in each calendar month, pooled over years."""
    counts = Counter(r.created_at.month for r in records if r.kind == "pull_request")
    n = sum(counts.values())
    if n == 0:
        return MonthlyHistogram(0, {}, {})
    full = {m: counts.get(m, 0) for m in range(1, 13)}
    return MonthlyHistogram(n, full, {m: c / n for m, c in full.items()})


@dataclass
class AdoptionStats:
    rates: dict[str, float]
    merged: int
    closed: int
    excluded_repos: list[str] = field(default_factory=list)

    @property
    def overall_rate(self) -> float | None:
        total = self.merged + self.closed
        return self.merged / total if total else None

    @property
    def mean_rate(self) -> float | None:
        return statistics.fmean(self.rates.values()) if self.rates else None

    @property
    def median_rate(self) -> float | None:
        return statistics.median(self.rates.values()) if self.rates else None

    @property
    def n_high(self) -> int:
        return sum(1 for r in self.rates.values() if r >= HIGH_ADOPTION)

    @property
    def n_low(self) -> int:
        return sum(1 for r in self.rates.values() if r <= LOW_ADOPTION)

    def to_dict(self) -> dict:
        def r6(v):
            return None if v is None else round(v, 6)

        return {
            "n_repos": len(self.rates),
            "merged": self.merged,
            "closed": self.closed,
            "overall_rate": r6(self.overall_rate),
            "mean_rate": r6(self.mean_rate),
            "median_rate": r6(self.median_rate),
            "repos_ge_080": self.n_high,
            "repos_le_020": self.n_low,
            "excluded_repos": sorted(self.excluded_repos),
            "rates": {k: r6(v) for k, v in sorted(self.rates.items())},
        }


def adoption_stats(records: Iterable[ActivityRecord]) -> AdoptionStats:
    """Per-repository merge rate, merged / (merged + closed), over pull requests.

    Open pull requests do not count; repositories left with no merged or
    closed pull request are reported in ``excluded_repos``.
    """
    merged: dict[str, int] = defaultdict(int)
    closed: dict[str, int] = defaultdict(int)
    seen: set[str] = set()
    for r in records:
        if r.kind != "pull_request":
            continue
        seen.add(r.repo)
        if r.state == "merged":
            merged[r.repo] += 1
        elif r.state == "closed":
            closed[r.repo] += 1
    rates = {}
    excluded = []
    for repo in sorted(seen):
        total = merged[repo] + closed[repo]
        if total == 0:
            excluded.append(repo)
        else:
            rates[repo] = merged[repo] / total
    return AdoptionStats(rates, sum(merged.values()), sum(closed.values()), excluded)


@dataclass
class ScaleRow:
    bucket: ScaleBucket
    repos: int
    prs: int
    issues: int


def scale_table(records: Sequence[ActivityRecord]) -> tuple[list[ScaleRow], list[ActivityRecord]]:
    """Repos/PRs/issues per star band, plus the out-of-band records."""
    repos: dict[ScaleBucket, set[str]] = defaultdict(set)
    prs: Counter = Counter()
    issues: Counter = Counter()
    out_of_band = []
    for r in records:
        bucket = classify_scale(r.stars, r.forks)
        if bucket is None:
            out_of_band.append(r)
            continue
        repos[bucket].add(r.repo)
        if r.kind == "pull_request":
            prs[bucket] += 1
        else:
            issues[bucket] += 1
    rows = [
        ScaleRow(b, len(repos[b]), prs[b], issues[b])
        for b in (ScaleBucket.LARGE, ScaleBucket.MEDIUM, ScaleBucket.SMALL)
    ]
    return rows, out_of_band


@dataclass
class MiningReport:
    n_records: int
    n_matching: int
    scale_rows: list[ScaleRow]
    n_out_of_band: int
    histogram: MonthlyHistogram
    adoption: AdoptionStats
    adoption_by_scale: dict[str, AdoptionStats]

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_matching": self.n_matching,
            "n_out_of_band": self.n_out_of_band,
            "scale": [
                {"scale": row.bucket.value, "repos": row.repos, "prs": row.prs, "issues": row.issues}
                for row in self.scale_rows
            ],
            "monthly": self.histogram.to_dict(),
            "adoption": self.adoption.to_dict(),
            "adoption_by_scale": {k: v.to_dict() for k, v in self.adoption_by_scale.items()},
        }


def analyze(records: Iterable[ActivityRecord], keyword_filter: bool = True) -> MiningReport:
    records = list(records)
    matching = filter_translation_records(records) if keyword_filter else records
    rows, out_of_band = scale_table(matching)
    in_band = [r for r in matching if classify_scale(r.stars, r.forks) is not None]
    by_scale = {
        b.value: adoption_stats(r for r in in_band if classify_scale(r.stars, r.forks) is b)
        for b in ScaleBucket
    }
    return MiningReport(
        n_records=len(records),
        n_matching=len(matching),
        scale_rows=rows,
        n_out_of_band=len(out_of_band),
        histogram=monthly_histogram(in_band),
        adoption=adoption_stats(in_band),
        adoption_by_scale=by_scale,
    )


_SCALE_LABELS = {
    ScaleBucket.LARGE: "Large Scale (> 10k)",
    ScaleBucket.MEDIUM: "Medium Scale (5k-10k)",
    ScaleBucket.SMALL: "Early Stage (100-5k)",
}


def scale_csv(rows: Sequence[ScaleRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Repository Scale", "Repos", "PRs", "Issues"])
    for row in rows:
        w.writerow([_SCALE_LABELS[row.bucket], row.repos, row.prs, row.issues])
    return buf.getvalue()


def adoption_csv(stats: AdoptionStats) -> str:
    def fmt(v):
        return "" if v is None else f"{v:.2f}"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Metric", "Value"])
    w.writerow(["Mean repo-level adoption rate", fmt(stats.mean_rate)])
    w.writerow(["Median repo-level adoption rate", fmt(stats.median_rate)])
    w.writerow(["Repos with adoption >= 0.80", stats.n_high])
    w.writerow(["Repos with adoption <= 0.20", stats.n_low])
    return buf.getvalue()


def monthly_csv(hist: MonthlyHistogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["month", "prs", "share"])
    for m in range(1, 13):
        w.writerow([m, hist.counts.get(m, 0), f"{hist.shares.get(m, 0.0):.6f}"])
    return buf.getvalue()
