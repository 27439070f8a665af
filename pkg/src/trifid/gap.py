"""Post-merge upkeep of translated READMEs in a local git clone.

Counts commits that touch the English README and a translated sibling within
a window after a translation was merged.  Commit times are committer
timestamps; the window is ``(start, start + window_days]``.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import posixpath
import re
import statistics
import subprocess
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Sequence, Union

from trifid.mine import parse_timestamp

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_DAYS = 180

_ENGLISH = re.compile(r"^readme\.md$", re.IGNORECASE)
_TRANSLATED = re.compile(
    r"^readme[._-]([a-z]{2}(?:[_-](?:[a-z]{2,4}|\d{3}))?)\.md$", re.IGNORECASE
)


class GitError(RuntimeError):
    pass


class NotAGitRepository(GitError):
    pass


@dataclass(frozen=True)
class ReadmeClass:
    path: str
    kind: str  # "english_source" | "translation"
    lang_tag: str | None = None


def classify_readme(path: str) -> ReadmeClass | None:
    """Classify a path as English README, language-tagged README, or neither (``None``)."""
    name = posixpath.basename(path.replace("\\", "/"))
    if _ENGLISH.match(name):
        return ReadmeClass(path, "english_source")
    m = _TRANSLATED.match(name)
    if m:
        return ReadmeClass(path, "translation", m.group(1))
    return None


def _git(repo: str | os.PathLike, *args: str) -> str:
    try:
        proc = subprocess.run(
            ["git", "-C", os.fspath(repo), *args],
            capture_output=True,
            text=True,
            encoding="utf-8",
        )
    except FileNotFoundError:
        raise GitError("git executable not found") from None
    if proc.returncode != 0:
        raise GitError(f"{repo}: git {' '.join(args)}: {proc.stderr.strip()}")
    return proc.stdout


def ensure_repo(repo: str | os.PathLike) -> None:
    if not os.path.isdir(repo):
        raise NotAGitRepository(f"{repo}: no such directory")
    try:
        _git(repo, "rev-parse", "--git-dir")
    except GitError:
        raise NotAGitRepository(f"{repo}: not a git repository") from None


TimeLike = Union[datetime, int, float, str]


def _to_datetime(value: TimeLike) -> datetime:
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    if isinstance(value, (int, float)):
        return datetime.fromtimestamp(value, tz=timezone.utc)
    return parse_timestamp(value)


def file_commit_times(repo: str | os.PathLike, file_path: str, rev: str = "HEAD") -> list[tuple[str, datetime]]:
    """``(sha, committer time)`` for every commit touching ``file_path``, following renames."""
    out = _git(repo, "log", "--follow", "--format=%H %ct", rev, "--", file_path)
    commits = []
    for line in out.splitlines():
        if line.strip():
            sha, ts = line.split()
            commits.append((sha, datetime.fromtimestamp(int(ts), tz=timezone.utc)))
    return commits


def commits_in_window(
    repo_path: str | os.PathLike,
    file_path: str,
    start_time: TimeLike,
    window_days: int = DEFAULT_WINDOW_DAYS,
    rev: str = "HEAD",
) -> int:
    """Number of commits touching ``file_path`` with ``start < t <= start + window_days``."""
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    ensure_repo(repo_path)
    start = _to_datetime(start_time)
    end = start + timedelta(days=window_days)
    commits = file_commit_times(repo_path, file_path, rev)
    if not commits:
        logger.warning("%s: %s has no history; counting 0", repo_path, file_path)
        return 0
    return sum(1 for _, t in commits if start < t <= end)


def resolve_merge_time(repo_path: str | os.PathLike, merge_ref: str) -> tuple[datetime, str | None]:
    """Committer time of ``merge_ref`` if it names a commit, else parse it as an ISO date."""
    try:
        sha = _git(repo_path, "rev-parse", "--verify", "--quiet", f"{merge_ref}^{{commit}}").strip()
    except GitError:
        sha = ""
    if sha:
        ts = _git(repo_path, "show", "-s", "--format=%ct", sha).strip()
        return datetime.fromtimestamp(int(ts), tz=timezone.utc), sha
    try:
        return parse_timestamp(merge_ref), None
    except ValueError:
        raise GitError(f"{repo_path}: {merge_ref!r} is neither a commit nor an ISO date") from None


def _tree_files(repo_path: str | os.PathLike, rev: str, directory: str) -> list[str]:
    prefix = f"{directory}/" if directory else ""
    try:
        out = _git(repo_path, "ls-tree", "--name-only", rev, prefix or ".")
    except GitError:
        return []
    return [line for line in out.splitlines() if line]


def find_english_sibling(repo_path: str | os.PathLike, translation_path: str, revs: Sequence[str] = ("HEAD",)) -> str | None:
    directory = posixpath.dirname(translation_path.replace("\\", "/"))
    for rev in revs:
        for path in _tree_files(repo_path, rev, directory):
            cls = classify_readme(path)
            if cls is not None and cls.kind == "english_source":
                return path
    return None


@dataclass
class GapReport:
    repo: str
    merge_ref: str
    merge_time: datetime
    window_days: int
    translation_path: str
    lang_tag: str | None
    english_path: str | None
    english_commits: int
    translation_commits: int
    comparable: bool = True

    @property
    def gap(self) -> int:
        return self.english_commits - self.translation_commits

    def to_dict(self) -> dict:
        return {
            "repo": self.repo,
            "merge_ref": self.merge_ref,
            "merge_time": self.merge_time.isoformat(),
            "window_days": self.window_days,
            "translation_path": self.translation_path,
            "lang_tag": self.lang_tag,
            "english_path": self.english_path,
            "english_commits": self.english_commits,
            "translation_commits": self.translation_commits,
            "gap": self.gap,
            "comparable": self.comparable,
        }


def gap_report(
    repo_path: str | os.PathLike,
    merge_ref: str,
    translation_path: str,
    window_days: int = DEFAULT_WINDOW_DAYS,
    rev: str = "HEAD",
) -> GapReport:
    """Compare upkeep of ``translation_path`` and its English sibling after ``merge_ref``.

    ``merge_ref`` is a commit-ish or an ISO-8601 date.  Without an English
    README in the same directory the report is marked not comparable.
    """
    ensure_repo(repo_path)
    cls = classify_readme(translation_path)
    if cls is None or cls.kind != "translation":
        raise ValueError(f"{translation_path}: not a language-tagged README")
    merge_time, sha = resolve_merge_time(repo_path, merge_ref)
    english = find_english_sibling(repo_path, translation_path, (rev,) + ((sha,) if sha else ()))
    trans_n = commits_in_window(repo_path, translation_path, merge_time, window_days, rev)
    if english is None:
        logger.warning("%s: no English README next to %s", repo_path, translation_path)
        eng_n, comparable = 0, False
    else:
        eng_n, comparable = commits_in_window(repo_path, english, merge_time, window_days, rev), True
    return GapReport(
        repo=os.fspath(repo_path),
        merge_ref=merge_ref,
        merge_time=merge_time,
        window_days=window_days,
        translation_path=translation_path,
        lang_tag=cls.lang_tag,
        english_path=english,
        english_commits=eng_n,
        translation_commits=trans_n,
        comparable=comparable,
    )


@dataclass
class CountStats:
    median: float
    mean: float
    maximum: int

    @classmethod
    def of(cls, values: Sequence[int]) -> "CountStats":
        if not values:
            raise ValueError("no values")
        return cls(statistics.median(values), statistics.fmean(values), max(values))

    def to_dict(self) -> dict:
        return {"median": self.median, "mean": round(self.mean, 2), "max": self.maximum}


@dataclass
class GapSummary:
    n_reports: int
    n_incomparable: int
    english: CountStats
    translation: CountStats

    def to_dict(self) -> dict:
        return {
            "n_reports": self.n_reports,
            "n_incomparable": self.n_incomparable,
            "english": self.english.to_dict(),
            "translation": self.translation.to_dict(),
        }


def summarize_gaps(reports: Sequence[GapReport]) -> GapSummary:
    usable = [r for r in reports if r.comparable]
    if not usable:
        raise ValueError("no comparable gap reports")
    return GapSummary(
        n_reports=len(usable),
        n_incomparable=len(reports) - len(usable),
        english=CountStats.of([r.english_commits for r in usable]),
        translation=CountStats.of([r.translation_commits for r in usable]),
    )


def survival_csv(summary: GapSummary) -> str:
    def num(v):
        return f"{v:g}" if isinstance(v, float) else str(v)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["", "English", "Translation"])
    w.writerow(["Median commits", num(summary.english.median), num(summary.translation.median)])
    w.writerow(["Mean commits", f"{summary.english.mean:.1f}", f"{summary.translation.mean:.1f}"])
    w.writerow(["Maximum commits", summary.english.maximum, summary.translation.maximum])
    return buf.getvalue()
