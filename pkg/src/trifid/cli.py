"""``trifid`` command line.

Exit codes: 0 all configured thresholds met (or none set), 1 a score fell
below a threshold, 2 operational error (missing file, bad input, backend
failure).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from trifid import corpus, gap, mine, translate
from trifid.extract import decode_document, extract_structure
from trifid.score import FidelityReport, round2, score_pair

EXIT_OK = 0
EXIT_BELOW_THRESHOLD = 1
EXIT_ERROR = 2

THRESHOLD_KEYS = ("code", "url", "markdown", "aggregate")
FORMATS = ("json", "csv", "human")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    thresholds: dict[str, float] = field(default_factory=dict)
    output_format: str = "json"
    source_lang: str = "en"
    target_lang: str = "de"
    backend: str | None = None
    backend_settings: str | None = None
    cache_dir: str | None = None
    concurrency: int = 2
    timeout: float = 300.0
    max_bytes: int = translate.DEFAULT_MAX_BYTES
    unwrap_fence: bool = False
    window_days: int = gap.DEFAULT_WINDOW_DAYS

    def validate(self) -> None:
        for key, value in self.thresholds.items():
            if key not in THRESHOLD_KEYS:
                raise UsageError(f"unknown threshold {key!r}")
            if not 0 <= value <= 100:
                raise UsageError(f"threshold {key}={value} outside [0, 100]")
        if self.output_format not in FORMATS:
            raise UsageError(f"format must be one of {', '.join(FORMATS)}")
        if self.window_days <= 0:
            raise UsageError("window_days must be positive")

    def failures(self, scores: dict[str, float]) -> list[str]:
        return [
            f"{k} {round2(scores[k]):g} < {v:g}"
            for k, v in sorted(self.thresholds.items())
            if scores[k] < v
        ]


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read an INI-style file with ``[thresholds]``, ``[output]``, ``[translate]`` and ``[gap]`` sections."""
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise UsageError(f"{path}: cannot read config file")
    cfg = RunConfig()
    try:
        if parser.has_section("thresholds"):
            cfg.thresholds = {k: parser.getfloat("thresholds", k) for k in parser.options("thresholds")}
        cfg.output_format = parser.get("output", "format", fallback=cfg.output_format)
        sec = "translate"
        cfg.source_lang = parser.get(sec, "source_lang", fallback=cfg.source_lang)
        cfg.target_lang = parser.get(sec, "target_lang", fallback=cfg.target_lang)
        cfg.backend = parser.get(sec, "backend", fallback=cfg.backend)
        cfg.backend_settings = parser.get(sec, "settings", fallback=cfg.backend_settings)
        cfg.cache_dir = parser.get(sec, "cache_dir", fallback=cfg.cache_dir)
        cfg.concurrency = parser.getint(sec, "concurrency", fallback=cfg.concurrency)
        cfg.timeout = parser.getfloat(sec, "timeout", fallback=cfg.timeout)
        cfg.max_bytes = parser.getint(sec, "max_bytes", fallback=cfg.max_bytes)
        cfg.unwrap_fence = parser.getboolean(sec, "unwrap_fence", fallback=cfg.unwrap_fence)
        cfg.window_days = parser.getint("gap", "window_days", fallback=cfg.window_days)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return cfg


def parse_lang(value: str) -> tuple[str, str]:
    """``de`` means en->de; ``fr:de`` or ``fr-de`` give both sides."""
    for sep in (":", "-"):
        if sep in value:
            src, _, dst = value.partition(sep)
            return src.strip(), dst.strip()
    return "en", value.strip()


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for key in THRESHOLD_KEYS:
        value = getattr(args, f"min_{key}", None)
        if value is not None:
            cfg.thresholds[key] = value
    if getattr(args, "format", None):
        cfg.output_format = args.format
    if getattr(args, "lang", None):
        cfg.source_lang, cfg.target_lang = parse_lang(args.lang)
    if getattr(args, "backend", None):
        cfg.backend = args.backend
    if getattr(args, "cache_dir", None):
        cfg.cache_dir = args.cache_dir
    if getattr(args, "window_days", None) is not None:
        cfg.window_days = args.window_days
    if getattr(args, "unwrap_fence", False):
        cfg.unwrap_fence = True
    cfg.validate()
    return cfg


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None


def format_report(report: FidelityReport, fmt: str) -> str:
    if fmt == "json":
        return dump_json(report.to_dict())
    scores = {
        "code": round2(report.code.total),
        "url": report.url.total,
        "markdown": round2(report.markdown.total),
        "aggregate": round2(report.aggregate),
    }
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(scores.keys())
        w.writerow(scores.values())
        return buf.getvalue()
    lines = [
        f"code       {scores['code']:6.2f}  ({report.code.n_orig} -> {report.code.n_trans} blocks,"
        f" content {'preserved' if report.code.content_preserved else 'changed'})",
        f"url        {scores['url']:6d}  ({report.url.n_preserved}/{report.url.n_orig_url} kept,"
        f" {report.url.n_extra} extra)",
        f"markdown   {scores['markdown']:6.2f}",
        f"aggregate  {scores['aggregate']:6.2f}",
    ]
    for url in sorted(report.url.missing):
        lines.append(f"  missing: {url}")
    for url in sorted(report.url.extra):
        lines.append(f"  extra:   {url}")
    return "\n".join(lines) + "\n"


def _gate(cfg: RunConfig, scores: dict[str, float]) -> int:
    failed = cfg.failures(scores)
    for msg in failed:
        print(f"trifid: below threshold: {msg}", file=sys.stderr)
    return EXIT_BELOW_THRESHOLD if failed else EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    structure = extract_structure(_read(args.file), label=args.file)
    sys.stdout.write(structure.to_json() + "\n")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    orig, trans = _read(args.original), _read(args.translation)
    report = score_pair(orig, trans)
    sys.stdout.write(format_report(report, cfg.output_format))
    return _gate(cfg, report.totals)


def cmd_batch(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if args.manifest:
        pairs = corpus.load_manifest(args.manifest)
    elif args.directory:
        pairs = corpus.discover_pairs(args.directory, cfg.target_lang)
    else:
        raise UsageError("batch needs a directory or --manifest")
    if not pairs:
        raise UsageError("no pairs found")
    result = corpus.run_corpus(pairs, workers=args.workers)
    for e in result.entries:
        if not e.ok:
            print(f"trifid: failed pair {e.error}", file=sys.stderr)
    if args.out_dir:
        corpus.write_outputs(result, args.out_dir, label=args.label)
    s = result.summary
    if cfg.output_format == "csv":
        sys.stdout.write(corpus.correlations_csv(s, args.label))
    elif cfg.output_format == "human":
        d = s.to_dict()
        for key in ("n_pairs", "n_failed", "mean_code", "mean_url", "mean_markdown", "mean_aggregate"):
            print(f"{key:16} {d[key]}")
        for m, v in d["spearman"].items():
            print(f"spearman[{m}] {'undefined' if v is None else v}")
    else:
        sys.stdout.write(dump_json({"summary": s.to_dict(), "entries": [e.to_dict() for e in result.entries]}))
    means = {"code": s.mean_code, "url": s.mean_url, "markdown": s.mean_markdown, "aggregate": s.mean_aggregate}
    return _gate(cfg, means)


def cmd_translate(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    source = decode_document(_read(args.file), label=args.file)
    backend = translate.backend_from_spec(cfg.backend, timeout=cfg.timeout, settings=cfg.backend_settings)
    cache_dir = cfg.cache_dir or os.environ.get(translate.ENV_CACHE_DIR)
    translator = translate.Translator(
        backend,
        cache=translate.TranslationCache(cache_dir),
        max_bytes=cfg.max_bytes,
        unwrap_fence=cfg.unwrap_fence,
        concurrency=cfg.concurrency,
    )
    job = translator.job(source, cfg.source_lang, cfg.target_lang)
    result = translator.translate(job)
    if args.output:
        Path(args.output).write_text(result.translated_text, encoding="utf-8")
    elif not args.score:
        sys.stdout.write(result.translated_text)
    if args.score:
        report = score_pair(source, result.translated_text)
        sys.stdout.write(format_report(report, cfg.output_format))
        return _gate(cfg, report.totals)
    return EXIT_OK


def cmd_mine(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    path = Path(args.records)
    try:
        with open(path, encoding="utf-8") as fh:
            records = list(mine.read_records(fh, str(path)))
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    report = mine.analyze(records, keyword_filter=not args.no_filter)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mining.json").write_text(dump_json(report.to_dict()), encoding="utf-8")
        (out / "scale.csv").write_text(mine.scale_csv(report.scale_rows), encoding="utf-8")
        (out / "adoption.csv").write_text(mine.adoption_csv(report.adoption), encoding="utf-8")
        (out / "monthly.csv").write_text(mine.monthly_csv(report.histogram), encoding="utf-8")
    if cfg.output_format == "csv":
        sys.stdout.write(mine.scale_csv(report.scale_rows))
        sys.stdout.write(mine.adoption_csv(report.adoption))
    elif cfg.output_format == "human":
        a = report.adoption.to_dict()
        print(f"records {report.n_records}, matching {report.n_matching}, out of band {report.n_out_of_band}")
        for row in report.scale_rows:
            print(f"{row.bucket.value:7} repos {row.repos:5}  prs {row.prs:5}  issues {row.issues:5}")
        print(f"merged {a['merged']}  closed {a['closed']}  overall {a['overall_rate']}")
        print(f"mean {a['mean_rate']}  median {a['median_rate']}  >=0.80 {a['repos_ge_080']}  <=0.20 {a['repos_le_020']}")
    else:
        sys.stdout.write(dump_json(report.to_dict()))
    return EXIT_OK


def _gap_jobs(args: argparse.Namespace) -> list[tuple[str, str, str]]:
    if args.manifest:
        with open(args.manifest, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        base = Path(args.manifest).parent
        jobs = []
        for i, row in enumerate(rows, start=1):
            try:
                jobs.append((str(base / row["repo"]), row["merge_ref"], row["translation"]))
            except KeyError as exc:
                raise UsageError(f"{args.manifest}: row {i} lacks {exc.args[0]!r}") from None
        return jobs
    if not (args.repo and args.merge_ref and args.translation):
        raise UsageError("gap needs REPO --merge-ref REF --translation PATH, or --manifest")
    return [(args.repo, args.merge_ref, args.translation)]


def cmd_gap(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    reports = []
    for repo, ref, path in _gap_jobs(args):
        try:
            reports.append(gap.gap_report(repo, ref, path, cfg.window_days))
        except (gap.GitError, ValueError) as exc:
            raise UsageError(f"{repo}: {exc}") from None
    summary = gap.summarize_gaps(reports) if any(r.comparable for r in reports) else None
    if cfg.output_format == "csv":
        if summary is None:
            raise UsageError("no comparable reports to summarize")
        sys.stdout.write(gap.survival_csv(summary))
    elif cfg.output_format == "human":
        for r in reports:
            flag = "" if r.comparable else "  (incomparable: no English README)"
            print(f"{r.repo} {r.translation_path}: english {r.english_commits}, translation {r.translation_commits}{flag}")
        if summary is not None and len(reports) > 1:
            sys.stdout.write(gap.survival_csv(summary))
    else:
        sys.stdout.write(
            dump_json({
                "reports": [r.to_dict() for r in reports],
                "summary": summary.to_dict() if summary else None,
            })
        )
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, thresholds: bool = False) -> None:
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--format", choices=FORMATS, help="output format (default json)")
    if thresholds:
        for key in THRESHOLD_KEYS:
            p.add_argument(f"--min-{key}", type=float, metavar="SCORE", help=f"fail (exit 1) if {key} score is lower")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trifid", description="Structural fidelity checks for translated Markdown.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="dump the extracted structure of a document as JSON")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("score", help="score one translation against its original")
    p.add_argument("original")
    p.add_argument("translation")
    _add_common(p, thresholds=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("batch", help="score a corpus of pairs")
    p.add_argument("directory", nargs="?", help="directory with X.md / X.<lang>.md pairs")
    p.add_argument("--manifest", help="CSV or JSON manifest with orig/trans columns")
    p.add_argument("--lang", help="translation language code used for pairing (default de)")
    p.add_argument("--out-dir", help="write summary.json, entries.jsonl and correlations.csv here")
    p.add_argument("--label", default="TriFid", help="row prefix in the correlation table")
    p.add_argument("--workers", type=int, default=4)
    _add_common(p, thresholds=True)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("translate", help="translate a document through a backend")
    p.add_argument("file")
    p.add_argument("--lang", help="target code, or source:target (default en:de)")
    p.add_argument("--backend", help=f"echo, drop-links, fail, an http(s) URL, or cmd:<command> (env {translate.ENV_BACKEND})")
    p.add_argument("--cache-dir", help=f"on-disk cache (env {translate.ENV_CACHE_DIR})")
    p.add_argument("--output", "-o", help="write the translation here instead of stdout")
    p.add_argument("--score", action="store_true", help="score the translation against the source")
    p.add_argument("--unwrap-fence", action="store_true", help="strip a single outer code fence from responses")
    _add_common(p, thresholds=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("mine", help="translation activity statistics from JSON-lines records")
    p.add_argument("records")
    p.add_argument("--no-filter", action="store_true", help="skip the title keyword filter")
    p.add_argument("--out-dir", help="write mining.json and CSV tables here")
    _add_common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("gap", help="commits to English vs translated README after a merge")
    p.add_argument("repo", nargs="?")
    p.add_argument("--merge-ref", help="commit or ISO date of the translation merge")
    p.add_argument("--translation", help="repo-relative path of the translated README")
    p.add_argument("--manifest", help="CSV with repo, merge_ref, translation columns")
    p.add_argument("--window-days", type=int, help=f"window length (default {gap.DEFAULT_WINDOW_DAYS})")
    _add_common(p)
    p.set_defaults(func=cmd_gap)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="trifid: %(message)s")
    try:
        return args.func(args)
    except (UsageError, corpus.CorpusError, mine.RecordError, gap.GitError) as exc:
        print(f"trifid: {exc}", file=sys.stderr)
    except (translate.BackendError, ValueError, OSError) as exc:
        print(f"trifid: {type(exc).__name__}: {exc}", file=sys.stderr)
    except Exception as exc:  # exit code contract: never a traceback
        logging.getLogger(__name__).debug("unexpected failure", exc_info=True)
        print(f"trifid: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
