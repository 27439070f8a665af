"""Batch scoring of (original, translation) pairs and corpus statistics."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from trifid.score import FidelityReport, round2, score_pair

logger = logging.getLogger(__name__)

METRICS = ("code", "url", "markdown", "aggregate")


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman's rho with average ranks for ties.

    Returns ``None`` when either ranking has zero variance (rho undefined).
    Raises ``ValueError`` on length mismatch or fewer than three points.
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    rx, ry = average_ranks(x), average_ranks(y)
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    dx = [r - mx for r in rx]
    dy = [r - my for r in ry]
    sxx = sum(d * d for d in dx)
    syy = sum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        return None
    rho = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@dataclass(frozen=True)
class PairSpec:
    pair_id: str
    orig_path: Path
    trans_path: Path


@dataclass
class CorpusEntry:
    pair_id: str
    orig_path: Path
    trans_path: Path
    report: FidelityReport | None = None
    byte_size: int | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.report is not None

    def to_dict(self) -> dict:
        out = {
            "pair_id": self.pair_id,
            "orig_path": str(self.orig_path),
            "trans_path": str(self.trans_path),
            "byte_size": self.byte_size,
            "status": "ok" if self.ok else "failed",
        }
        if self.ok:
            out["report"] = self.report.to_dict()
        else:
            out["error"] = self.error
        return out


@dataclass
class CorpusSummary:
    n_pairs: int
    n_failed: int
    mean_code: float
    mean_url: float
    mean_markdown: float
    mean_aggregate: float
    mean_of_metric_means: float
    spearman: dict[str, float | None] = field(default_factory=dict)
    spearman_note: str | None = None

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "n_failed": self.n_failed,
            "mean_code": round2(self.mean_code),
            "mean_url": round2(self.mean_url),
            "mean_markdown": round2(self.mean_markdown),
            "mean_aggregate": round2(self.mean_aggregate),
            "mean_of_metric_means": round2(self.mean_of_metric_means),
            "spearman": {k: (None if v is None else round(v, 6)) for k, v in self.spearman.items()},
            "spearman_note": self.spearman_note,
        }


@dataclass
class CorpusResult:
    entries: list[CorpusEntry]
    summary: CorpusSummary


class CorpusError(RuntimeError):
    pass


def _score_one(spec: PairSpec) -> CorpusEntry:
    entry = CorpusEntry(spec.pair_id, spec.orig_path, spec.trans_path)
    try:
        orig = Path(spec.orig_path).read_bytes()
        trans = Path(spec.trans_path).read_bytes()
        entry.report = score_pair(orig, trans)
        entry.byte_size = len(orig)
    except (OSError, ValueError) as exc:
        entry.error = f"{spec.pair_id}: {exc}"
        logger.warning("pair %s failed: %s", spec.pair_id, exc)
    return entry


def summarize(entries: Sequence[CorpusEntry]) -> CorpusSummary:
    ok = [e for e in entries if e.ok]
    if not ok:
        raise CorpusError("every pair failed; nothing to summarize")
    by_metric = {m: [e.report.totals[m] for e in ok] for m in METRICS}
    means = {m: statistics.fmean(v) for m, v in by_metric.items()}
    sizes = [e.byte_size for e in ok]
    corr: dict[str, float | None] = {}
    note = None
    if len(ok) < 3:
        note = "fewer than 3 scored pairs"
    elif len(set(sizes)) == 1:
        note = "all file sizes equal"
    if note is None:
        for m in METRICS:
            corr[m] = spearman(sizes, by_metric[m])
        if any(v is None for v in corr.values()):
            note = "constant scores leave some correlations undefined"
    else:
        corr = dict.fromkeys(METRICS)
    return CorpusSummary(
        n_pairs=len(ok),
        n_failed=len(entries) - len(ok),
        mean_code=means["code"],
        mean_url=means["url"],
        mean_markdown=means["markdown"],
        mean_aggregate=means["aggregate"],
        mean_of_metric_means=(means["code"] + means["url"] + means["markdown"]) / 3,
        spearman=corr,
        spearman_note=note,
    )


def run_corpus(pairs: Iterable[PairSpec | tuple], workers: int = 4) -> CorpusResult:
    """Score every pair and summarize.

    Entries come back in input order regardless of ``workers``.  Failed pairs
    are kept with a reason; :class:`CorpusError` is raised only if all fail.
    """
    specs = [p if isinstance(p, PairSpec) else _as_spec(p, i) for i, p in enumerate(pairs)]
    if not specs:
        raise CorpusError("no pairs given")
    ids = [s.pair_id for s in specs]
    if len(set(ids)) != len(ids):
        raise CorpusError("pair ids must be unique")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_score_one, specs))
    else:
        entries = [_score_one(s) for s in specs]
    return CorpusResult(entries=entries, summary=summarize(entries))


def _as_spec(pair: tuple, i: int) -> PairSpec:
    if len(pair) == 3:
        pid, orig, trans = pair
    else:
        orig, trans = pair
        pid = Path(orig).stem or str(i)
    return PairSpec(str(pid), Path(orig), Path(trans))


def load_manifest(path: str | os.PathLike) -> list[PairSpec]:
    """Read a pair manifest.

    CSV needs ``orig`` and ``trans`` columns (optional ``pair_id``).  JSON may be
    a list of objects or JSON lines with the same keys.  Relative paths resolve
    against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    else:
        stripped = text.lstrip()
        if stripped.startswith("["):
            rows = json.loads(text)
        else:
            rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    specs = []
    for i, row in enumerate(rows):
        try:
            orig, trans = row["orig"], row["trans"]
        except KeyError as exc:
            raise CorpusError(f"{path}: record {i + 1} lacks {exc.args[0]!r}") from None
        pid = row.get("pair_id") or Path(orig).stem
        specs.append(PairSpec(str(pid), base / orig, base / trans))
    return specs


def discover_pairs(directory: str | os.PathLike, lang: str = "de") -> list[PairSpec]:
    """Pair ``X.md`` with ``X.<lang>.md`` inside ``directory`` (non-recursive)."""
    directory = Path(directory)
    suffix = f".{lang}.md"
    specs = []
    for trans in sorted(directory.glob(f"*{suffix}")):
        stem = trans.name[: -len(suffix)]
        orig = directory / f"{stem}.md"
        if orig.exists():
            specs.append(PairSpec(stem, orig, trans))
        else:
            logger.warning("no original for %s", trans)
    return specs


def correlations_csv(summary: CorpusSummary, label: str = "TriFid") -> str:
    """Metric/correlation table, one row per score."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Metrics", "Correlation"])
    for m in METRICS:
        v = summary.spearman.get(m)
        writer.writerow([f"{label}_{m.capitalize()}", "undefined" if v is None else f"{v:.6f}"])
    return buf.getvalue()


def write_outputs(result: CorpusResult, out_dir: str | os.PathLike, label: str = "TriFid") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(
        json.dumps(result.summary.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with open(out / "entries.jsonl", "w", encoding="utf-8") as fh:
        for e in result.entries:
            fh.write(json.dumps(e.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    (out / "correlations.csv").write_text(correlations_csv(result.summary, label), encoding="utf-8")
