"""Sweep the mock link-loss rate and record how the size/URL correlation moves.

    python3 scripts/loss_sweep.py --seeds 1 2 3 --rates 0 0.02 0.05 0.1 0.2
"""
import argparse
import csv
import random
import sys
import tempfile
from pathlib import Path

from trifid.corpus import run_corpus
from trifid.synthetic import DegradingBackend, random_readme
from trifid.translate import Translator


def one_run(seed: int, rate: float, n: int, workdir: Path):
    rng = random.Random(seed)
    translator = Translator(DegradingBackend(seed=seed, loss_per_kib=rate))
    pairs = []
    for i in range(n):
        text = random_readme(rng, sections=rng.randint(2, 60))
        out = translator.translate(translator.job(text)).translated_text
        a, b = workdir / f"{seed}-{i}.md", workdir / f"{seed}-{i}.de.md"
        a.write_text(text, encoding="utf-8")
        b.write_text(out, encoding="utf-8")
        pairs.append((f"{seed}-{i}", a, b))
    return run_corpus(pairs).summary


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--rates", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1, 0.2])
    ap.add_argument("--n", type=int, default=30)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["seed", "loss_per_kib", "mean_url", "spearman_url"])
    with tempfile.TemporaryDirectory() as tmp:
        for rate in args.rates:
            for seed in args.seeds:
                s = one_run(seed, rate, args.n, Path(tmp))
                rho = s.spearman["url"]
                w.writerow([seed, rate, f"{s.mean_url:.2f}", "undefined" if rho is None else f"{rho:.3f}"])


if __name__ == "__main__":
    main()
