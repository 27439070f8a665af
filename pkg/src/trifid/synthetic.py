"""Seeded synthetic READMEs and mock translators for offline experiments."""
from __future__ import annotations

import hashlib
import random
import re

from trifid.extract import fence_regions

_WORDS = (
    "install configure run server client request response cache token model "
    "dataset plugin option feature release build deploy module package update "
    "support example guide project library command output input value default"
).split()


def _sentence(rng: random.Random, n: int | None = None) -> str:
    words = [rng.choice(_WORDS) for _ in range(n or rng.randint(5, 14))]
    return " ".join(words).capitalize() + "."


def random_readme(rng: random.Random, sections: int) -> str:
    """A README with ``sections`` sections mixing every tracked structure."""
    out = [f"# {rng.choice(_WORDS).title()} {rng.randint(1, 999)}", "", _sentence(rng), ""]
    link_id = 0
    for s in range(sections):
        out += [f"## {rng.choice(_WORDS).title()} {s}", ""]
        for _ in range(rng.randint(1, 3)):
            words = _sentence(rng).split()
            i = rng.randrange(len(words))
            link_id += 1
            words[i] = f"[{words[i]}](https://docs.example.org/s{s}/p{link_id})"
            if rng.random() < 0.5:
                j = rng.randrange(len(words))
                words[j] = f"**{words[j]}**" if rng.random() < 0.5 else f"*{words[j]}*"
            out += [" ".join(words), ""]
        kind = rng.randrange(4)
        if kind == 0:
            out += ["```bash", f"# step {s}", f"pip install pkg{s}", f"pkg{s} --run", "```", ""]
        elif kind == 1:
            out += [f"- {_sentence(rng, 4)}" for _ in range(rng.randint(2, 4))] + [""]
        elif kind == 2:
            out += [f"{k + 1}. {_sentence(rng, 4)}" for k in range(rng.randint(2, 4))] + [""]
        else:
            out += ["| name | value |", "| --- | --- |", f"| {rng.choice(_WORDS)} | {s} |", ""]
        if rng.random() < 0.3:
            out += [f"> {_sentence(rng)}", ""]
    return "\n".join(out)


_INLINE_LINK = re.compile(r"\[([^\]]*)\]\((https?://[^)\s]+)\)")


class DegradingBackend:
    """Mock translator that loses links more often as documents grow.

    Each link survives with probability ``max(floor, 1 - size_kib * loss_per_kib)``;
    draws are seeded by the document so results are reproducible.
    """

    def __init__(self, seed: int = 0, loss_per_kib: float = 0.08, floor: float = 0.1):
        self.seed = seed
        self.loss_per_kib = loss_per_kib
        self.floor = floor
        self.backend_id = f"mock:degrading:{seed}:{loss_per_kib}:{floor}"
        self.calls = 0

    def complete(self, request: dict) -> dict:
        self.calls += 1
        text = request["source_text"]
        digest = hashlib.sha256(f"{self.seed}\0{text}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        keep = max(self.floor, 1.0 - len(text.encode("utf-8")) / 1024 * self.loss_per_kib)
        lines = text.split("\n")
        code = set()
        for start, end, _ in fence_regions(lines):
            code.update(range(start, end + 1))
        out = []
        for i, line in enumerate(lines):
            if i not in code:
                line = _INLINE_LINK.sub(lambda m: m.group(0) if rng.random() < keep else m.group(1), line)
            out.append(line)
        return {"translated_text": "\n".join(out), "meta": f"keep={keep:.3f}"}
