import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
README_FIXTURES = sorted((FIXTURES / "readmes").glob("*.md"))
CORPUS_DIR = FIXTURES / "corpus"


@pytest.fixture
def corpus_dir():
    return CORPUS_DIR


_word = st.text(alphabet="abcdefghijklmnopqrstuvwxyzäöüß", min_size=1, max_size=8)
_url = st.builds(
    lambda host, path: f"https://{host}.example/{path}",
    st.sampled_from(["a", "b", "docs", "cdn", "x-y"]),
    st.text(alphabet="abc123_-/", max_size=6),
)


def _sentence(words):
    return " ".join(words)


_inline = st.one_of(
    _word,
    _word.map(lambda w: f"**{w}**"),
    _word.map(lambda w: f"*{w}*"),
    _word.map(lambda w: f"_{w}_"),
    _word.map(lambda w: f"`{w}`"),
    st.tuples(_word, _url).map(lambda t: f"[{t[0]}]({t[1]})"),
    _url,
    _url.map(lambda u: f"<{u}>"),
)

_line = st.one_of(
    st.lists(_inline, min_size=1, max_size=6).map(_sentence),
    st.tuples(st.integers(1, 6), _word).map(lambda t: "#" * t[0] + " " + t[1]),
    st.lists(_inline, min_size=1, max_size=4).map(lambda ws: "- " + _sentence(ws)),
    st.lists(_inline, min_size=1, max_size=4).map(lambda ws: "* " + _sentence(ws)),
    st.lists(_inline, min_size=1, max_size=4).map(lambda ws: "1. " + _sentence(ws)),
    st.lists(_inline, min_size=1, max_size=4).map(lambda ws: "> " + _sentence(ws)),
    st.just("| a | b |\n| --- | --- |\n| 1 | 2 |"),
    st.lists(_word, max_size=4).map(lambda ws: "```\n" + "\n".join(ws) + "\n```"),
    st.lists(_word, max_size=3).map(lambda ws: "~~~py\n# c\n" + "\n".join(ws) + "\n~~~"),
    st.tuples(_word, _url).map(lambda t: f"[{t[0]}]: {t[1]}"),
    st.text(max_size=40),
    st.just(""),
)


@st.composite
def markdown_documents(draw, max_lines=25):
    """Random Markdown mixing every construct the extractor knows, plus raw noise."""
    return "\n".join(draw(st.lists(_line, max_size=max_lines)))


# Acceptance reporting: one line per criterion in the terminal summary.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
