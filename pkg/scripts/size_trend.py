"""Size vs. fidelity on a seeded synthetic corpus.

Generates READMEs of growing length, passes them through a mock translator
that loses links more often in larger documents, and reports the Spearman
correlation of file size with each score.

    python3 scripts/size_trend.py --n 50 --seed 7 --out runs/size_trend
"""
import argparse
import json
import random
import tempfile
from pathlib import Path

from trifid.corpus import run_corpus, write_outputs
from trifid.synthetic import DegradingBackend, random_readme
from trifid.translate import Translator


def build_corpus(out: Path, n: int, seed: int, max_sections: int, loss_per_kib: float):
    rng = random.Random(seed)
    translator = Translator(DegradingBackend(seed=seed, loss_per_kib=loss_per_kib))
    pairs = []
    for i in range(n):
        text = random_readme(rng, sections=rng.randint(2, max_sections))
        translated = translator.translate(translator.job(text)).translated_text
        orig, trans = out / f"doc{i:03d}.md", out / f"doc{i:03d}.de.md"
        orig.write_text(text, encoding="utf-8")
        trans.write_text(translated, encoding="utf-8")
        pairs.append((f"doc{i:03d}", orig, trans))
    return pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--max-sections", type=int, default=60)
    ap.add_argument("--loss-per-kib", type=float, default=0.08)
    ap.add_argument("--out", type=Path, help="keep the corpus and result files here")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        corpus_dir = args.out or Path(tmp)
        corpus_dir.mkdir(parents=True, exist_ok=True)
        pairs = build_corpus(corpus_dir, args.n, args.seed, args.max_sections, args.loss_per_kib)
        result = run_corpus(pairs)
        if args.out:
            write_outputs(result, args.out, label="Synthetic")
    print(json.dumps(result.summary.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
