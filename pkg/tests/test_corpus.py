import csv
import io
import json
import random

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import rank_then_pearson
from trifid.corpus import (
    CorpusError,
    PairSpec,
    average_ranks,
    correlations_csv,
    discover_pairs,
    load_manifest,
    run_corpus,
    spearman,
    write_outputs,
)

# Hand-scored with the published formulas (see tests/fixtures/corpus):
#   p1 identity-like          code 100   url 100  md 100
#   p2 9/10 links kept        code 100   url  93  md 100
#   p3 4 vs 3 blocks, changed code 37.5  url 100  md 100
#   p4 +2 links, 10 vs 8 h    code 75    url  85  md (6.8/7)*100
#   p5 0/3 links, bold 2 vs 1 code 25    url  30  md (6.5/7)*100
HAND_SCORES = {
    "p1": (100.0, 100, 100.0),
    "p2": (100.0, 93, 100.0),
    "p3": (37.5, 100, 100.0),
    "p4": (75.0, 85, 680 / 7),
    "p5": (25.0, 30, 650 / 7),
}


class TestSpearman:
    def test_identical_ranking(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed_ranking(self):
        assert spearman([1, 2, 3], [30, 20, 10]) == -1.0

    def test_ties_match_oracle(self):
        x, y = [1, 2, 2, 4], [3, 1, 4, 2]
        assert spearman(x, y) == pytest.approx(rank_then_pearson(x, y), abs=1e-9)
        # average ranks: x -> 1, 2.5, 2.5, 4
        assert average_ranks(x) == [1, 2.5, 2.5, 4]

    def test_errors(self):
        with pytest.raises(ValueError, match="length"):
            spearman([1, 2, 3], [1, 2])
        with pytest.raises(ValueError, match="at least 3"):
            spearman([1, 2], [1, 2])

    def test_zero_variance_is_undefined_not_zero(self):
        assert spearman([1, 1, 1], [1, 2, 3]) is None
        assert spearman([1, 2, 3], [5, 5, 5]) is None

    @settings(max_examples=200)
    @given(st.lists(st.integers(-5, 5), min_size=3, max_size=30), st.data())
    def test_oracle(self, x, data):
        y = data.draw(st.lists(st.integers(-5, 5), min_size=len(x), max_size=len(x)))
        expected = rank_then_pearson(x, y)
        got = spearman(x, y)
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected, abs=1e-9)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=30, unique=True))
    def test_self_and_negation(self, x):
        assert spearman(x, x) == pytest.approx(1.0, abs=1e-12)
        assert spearman(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.data())
    def test_monotone_transform_invariance(self, x, data):
        y = data.draw(st.lists(st.floats(-100, 100), min_size=len(x), max_size=len(x)))
        base = spearman(x, y)
        assume(base is not None)
        transformed = [v * 3 + 7 for v in x]
        cubed = [v**3 for v in y]
        assume(len(set(transformed)) == len(set(x)) and len(set(cubed)) == len(set(y)))
        assert spearman(transformed, cubed) == pytest.approx(base, abs=1e-9)


class TestRunCorpus:
    def test_fixture_corpus_matches_hand_scores(self, corpus_dir):
        result = run_corpus(load_manifest(corpus_dir / "manifest.csv"))
        by_id = {e.pair_id: e for e in result.entries}
        for pid, (code, url, md) in HAND_SCORES.items():
            r = by_id[pid].report
            assert r.code.total == code
            assert r.url.total == url
            assert r.markdown.total == pytest.approx(md, abs=1e-9)
        s = result.summary
        assert s.n_pairs == 5
        assert s.mean_code == pytest.approx(67.5)
        assert s.mean_url == pytest.approx(81.6)
        assert s.mean_markdown == pytest.approx(98.0)
        assert s.mean_aggregate == pytest.approx((67.5 + 81.6 + 98.0) / 3)
        assert s.mean_of_metric_means == pytest.approx(s.mean_aggregate)

    def test_discovery_matches_manifest(self, corpus_dir):
        found = discover_pairs(corpus_dir, "de")
        assert [p.pair_id for p in found] == ["p1", "p2", "p3", "p4", "p5"]
        a = run_corpus(found).summary.to_dict()
        b = run_corpus(load_manifest(corpus_dir / "manifest.csv")).summary.to_dict()
        assert a == b

    def test_identity_corpus(self, tmp_path):
        pairs = []
        for i, body in enumerate(["# a\n", "# bb\n[x](https://x.io)\n", "# ccc\n```\nz\n```\n"]):
            (tmp_path / f"d{i}.md").write_text(body)
            (tmp_path / f"d{i}.de.md").write_text(body)
            pairs.append((tmp_path / f"d{i}.md", tmp_path / f"d{i}.de.md"))
        s = run_corpus(pairs).summary
        assert (s.mean_code, s.mean_url, s.mean_markdown, s.mean_aggregate) == (100, 100, 100, 100)
        assert all(v is None for v in s.spearman.values())
        assert s.spearman_note

    def test_url_falling_with_size_gives_minus_one(self, tmp_path):
        pairs = []
        for i in range(1, 6):
            orig = "".join(f"- [l](https://e.io/{k})\n" for k in range(10)) + "pad " * (50 * i)
            kept = 10 - i
            trans = "".join(f"- [l](https://e.io/{k})\n" for k in range(kept)) + "pad " * (50 * i)
            (tmp_path / f"o{i}.md").write_text(orig)
            (tmp_path / f"t{i}.md").write_text(trans)
            pairs.append((f"p{i}", tmp_path / f"o{i}.md", tmp_path / f"t{i}.md"))
        s = run_corpus(pairs).summary
        assert s.spearman["url"] == -1.0
        assert s.spearman["code"] is None

    def test_failed_pair_recorded(self, corpus_dir, tmp_path):
        specs = load_manifest(corpus_dir / "manifest.csv")
        specs.append(PairSpec("ghost", tmp_path / "missing.md", tmp_path / "missing.de.md"))
        bad = tmp_path / "bad.md"
        bad.write_bytes(b"\xff\xfe")
        specs.append(PairSpec("bad", bad, bad))
        result = run_corpus(specs)
        assert result.summary.n_pairs == 5
        assert result.summary.n_failed == 2
        failed = {e.pair_id: e.error for e in result.entries if not e.ok}
        assert "ghost" in failed["ghost"]
        assert "byte offset 0" in failed["bad"]

    def test_all_failed_raises(self, tmp_path):
        with pytest.raises(CorpusError):
            run_corpus([(tmp_path / "a.md", tmp_path / "b.md")])

    def test_empty_raises(self):
        with pytest.raises(CorpusError):
            run_corpus([])

    def test_duplicate_ids_rejected(self, corpus_dir):
        spec = load_manifest(corpus_dir / "manifest.csv")[0]
        with pytest.raises(CorpusError, match="unique"):
            run_corpus([spec, spec])

    def test_order_and_parallelism_do_not_matter(self, corpus_dir):
        specs = load_manifest(corpus_dir / "manifest.csv")
        serial = run_corpus(specs, workers=1)
        shuffled = specs[:]
        random.Random(3).shuffle(shuffled)
        parallel = run_corpus(shuffled, workers=8)
        assert serial.summary.to_dict() == parallel.summary.to_dict()
        assert [e.pair_id for e in parallel.entries] == [s.pair_id for s in shuffled]

    def test_means_within_entry_range(self, corpus_dir):
        result = run_corpus(load_manifest(corpus_dir / "manifest.csv"))
        s = result.summary
        for metric, mean in (("code", s.mean_code), ("url", s.mean_url), ("markdown", s.mean_markdown)):
            values = [e.report.totals[metric] for e in result.entries]
            assert min(values) <= mean <= max(values)


class TestManifestAndOutputs:
    def test_json_and_jsonl_manifests(self, corpus_dir, tmp_path):
        rows = [{"pair_id": f"p{i}", "orig": str(corpus_dir / f"p{i}.md"), "trans": str(corpus_dir / f"p{i}.de.md")} for i in range(1, 6)]
        (tmp_path / "m.json").write_text(json.dumps(rows))
        (tmp_path / "m.jsonl").write_text("\n".join(json.dumps(r) for r in rows))
        a = load_manifest(tmp_path / "m.json")
        b = load_manifest(tmp_path / "m.jsonl")
        assert a == b
        assert [p.pair_id for p in a] == ["p1", "p2", "p3", "p4", "p5"]

    def test_manifest_missing_column(self, tmp_path):
        (tmp_path / "m.csv").write_text("orig\nx.md\n")
        with pytest.raises(CorpusError, match="trans"):
            load_manifest(tmp_path / "m.csv")

    def test_written_outputs(self, corpus_dir, tmp_path):
        result = run_corpus(load_manifest(corpus_dir / "manifest.csv"))
        write_outputs(result, tmp_path, label="Mock")
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["mean_url"] == 81.6
        lines = (tmp_path / "entries.jsonl").read_text().splitlines()
        assert [json.loads(l)["pair_id"] for l in lines] == ["p1", "p2", "p3", "p4", "p5"]
        rows = list(csv.reader(io.StringIO((tmp_path / "correlations.csv").read_text())))
        assert rows[0] == ["Metrics", "Correlation"]
        assert [r[0] for r in rows[1:]] == ["Mock_Code", "Mock_Url", "Mock_Markdown", "Mock_Aggregate"]

    def test_correlations_csv_marks_undefined(self, tmp_path):
        body = "# same\n"
        pairs = []
        for i in range(3):
            (tmp_path / f"{i}.md").write_text(body)
            pairs.append((str(i), tmp_path / f"{i}.md", tmp_path / f"{i}.md"))
        text = correlations_csv(run_corpus(pairs).summary)
        assert "undefined" in text
