"""The three TriFid preservation scores and their aggregate.

All scores live in [0, 100].  Only the URL score is rounded (to an integer,
half-up); code and markdown totals keep full precision and are rounded to two
decimals when serialized.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Union

from trifid.extract import CATEGORIES, DocumentStructure, extract_structure

CODE_COUNT_WEIGHT = 50
CODE_CONTENT_WEIGHT = 50
URL_PRESERVE_WEIGHT = 70
URL_EXTRA_WEIGHT = 30


def count_ratio(a: int, b: int) -> float:
    """min/max of two counts, defined as 1.0 when both are zero."""
    if a == 0 and b == 0:
        return 1.0
    return min(a, b) / max(a, b)


def round_half_up(value: Union[float, Fraction]) -> int:
    if isinstance(value, Fraction):
        return int((value * 2 + 1) // 2)
    return int(Decimal(repr(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def round2(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class CodeScoreDetail:
    n_orig: int
    n_trans: int
    r_count: float
    count_points: float
    content_preserved: bool
    content_points: int
    total: float

    def to_dict(self) -> dict:
        return {
            "n_orig": self.n_orig,
            "n_trans": self.n_trans,
            "r_count": round2(self.r_count),
            "count_points": round2(self.count_points),
            "content_preserved": self.content_preserved,
            "content_points": self.content_points,
            "total": round2(self.total),
        }


@dataclass(frozen=True)
class UrlScoreDetail:
    preserved: frozenset[str]
    missing: frozenset[str]
    extra: frozenset[str]
    n_orig_url: int
    preserve_points: float
    extra_penalty: float
    extra_points: float
    total: int

    @property
    def n_preserved(self) -> int:
        return len(self.preserved)

    @property
    def n_missing(self) -> int:
        return len(self.missing)

    @property
    def n_extra(self) -> int:
        return len(self.extra)

    def to_dict(self) -> dict:
        return {
            "preserved": sorted(self.preserved),
            "missing": sorted(self.missing),
            "extra": sorted(self.extra),
            "n_preserved": self.n_preserved,
            "n_missing": self.n_missing,
            "n_extra": self.n_extra,
            "n_orig_url": self.n_orig_url,
            "preserve_points": round2(self.preserve_points),
            "extra_penalty": round2(self.extra_penalty),
            "extra_points": round2(self.extra_points),
            "total": self.total,
        }


@dataclass(frozen=True)
class MarkdownScoreDetail:
    orig_counts: dict[str, int]
    trans_counts: dict[str, int]
    per_category_ratios: dict[str, float]
    total: float

    def to_dict(self) -> dict:
        return {
            "orig_counts": {k: self.orig_counts[k] for k in CATEGORIES},
            "trans_counts": {k: self.trans_counts[k] for k in CATEGORIES},
            "per_category_ratios": {k: round2(v) for k, v in self.per_category_ratios.items()},
            "total": round2(self.total),
        }


@dataclass(frozen=True)
class FidelityReport:
    code: CodeScoreDetail
    url: UrlScoreDetail
    markdown: MarkdownScoreDetail
    aggregate: float

    @property
    def totals(self) -> dict[str, float]:
        return {
            "code": self.code.total,
            "url": self.url.total,
            "markdown": self.markdown.total,
            "aggregate": self.aggregate,
        }

    def to_dict(self) -> dict:
        return {
            "code": self.code.to_dict(),
            "url": self.url.to_dict(),
            "markdown": self.markdown.to_dict(),
            "aggregate": round2(self.aggregate),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent, ensure_ascii=False)


def score_code(orig: DocumentStructure, trans: DocumentStructure) -> CodeScoreDetail:
    n_orig, n_trans = orig.n_code_blocks, trans.n_code_blocks
    r = count_ratio(n_orig, n_trans)
    # multiset containment: every normalized original block must appear in the translation
    wanted = Counter(b.normalized_lines for b in orig.code_blocks)
    have = Counter(b.normalized_lines for b in trans.code_blocks)
    preserved = all(have[block] >= n for block, n in wanted.items())
    count_points = CODE_COUNT_WEIGHT * r
    content_points = CODE_CONTENT_WEIGHT if preserved else 0
    return CodeScoreDetail(
        n_orig=n_orig,
        n_trans=n_trans,
        r_count=r,
        count_points=count_points,
        content_preserved=preserved,
        content_points=content_points,
        total=count_points + content_points,
    )


def url_score_from_sets(orig_urls: frozenset[str] | set[str], trans_urls: frozenset[str] | set[str]) -> UrlScoreDetail:
    orig_urls, trans_urls = frozenset(orig_urls), frozenset(trans_urls)
    preserved = orig_urls & trans_urls
    missing = orig_urls - trans_urls
    extra = trans_urls - orig_urls
    n_orig = len(preserved) + len(missing)
    if n_orig == 0:
        return UrlScoreDetail(preserved, missing, extra, 0, 0.0, 0.0, 0.0, 100)
    preserve = Fraction(URL_PRESERVE_WEIGHT * len(preserved), n_orig)
    penalty = min(Fraction(URL_EXTRA_WEIGHT), Fraction(URL_EXTRA_WEIGHT * len(extra), n_orig))
    bonus = URL_EXTRA_WEIGHT - penalty
    # round, then clamp
    total = max(0, min(100, round_half_up(preserve + bonus)))
    return UrlScoreDetail(
        preserved=preserved,
        missing=missing,
        extra=extra,
        n_orig_url=n_orig,
        preserve_points=float(preserve),
        extra_penalty=float(penalty),
        extra_points=float(bonus),
        total=total,
    )


def score_url(orig: DocumentStructure, trans: DocumentStructure) -> UrlScoreDetail:
    return url_score_from_sets(orig.urls, trans.urls)


def score_markdown(orig: DocumentStructure, trans: DocumentStructure) -> MarkdownScoreDetail:
    ratios = {
        cat: count_ratio(orig.element_counts[cat], trans.element_counts[cat]) for cat in CATEGORIES
    }
    total = sum(ratios.values()) / len(CATEGORIES) * 100
    return MarkdownScoreDetail(
        orig_counts=dict(orig.element_counts),
        trans_counts=dict(trans.element_counts),
        per_category_ratios=ratios,
        total=total,
    )


def score_structures(orig: DocumentStructure, trans: DocumentStructure) -> FidelityReport:
    code = score_code(orig, trans)
    url = score_url(orig, trans)
    markdown = score_markdown(orig, trans)
    return FidelityReport(
        code=code,
        url=url,
        markdown=markdown,
        aggregate=(code.total + url.total + markdown.total) / 3,
    )


def score_pair(orig_text: Union[str, bytes], trans_text: Union[str, bytes]) -> FidelityReport:
    """Score a translation against its source document.

    Decoding failures name the offending side ("original" or "translation").
    """
    orig = extract_structure(orig_text, label="original")
    trans = extract_structure(trans_text, label="translation")
    return score_structures(orig, trans)
