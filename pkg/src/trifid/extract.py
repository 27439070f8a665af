"""Structural extraction of Markdown documents.

Pulls out the three things a translation has to carry over untouched:
fenced code blocks, link targets, and formatting elements.  Everything is
line/regex based so the result is deterministic and cheap; it is not a
CommonMark parser.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

CATEGORIES = (
    "headers",
    "bold",
    "italic",
    "lists",
    "numbered_lists",
    "tables",
    "blockquotes",
)

_FENCE_OPEN = re.compile(r"^( {0,3})(`{3,}|~{3,})(.*)$")
_COMMENT_LEAD = ("#", "$", "*")

# masking placeholder: not whitespace, not a word char, not a marker
_MASK = "\x1a"

_INLINE_CODE = re.compile(r"(?<!`)(`+)(?!`)(.+?)(?<!`)\1(?!`)")
_ESCAPED = re.compile(r"\\[\\`*_\[\]()<>#+\-.!|>]")

_DEST = r"(?:<[^<>\n]*>|[^\s()<>]*(?:\([^\s()]*\)[^\s()<>]*)*)"
_INLINE_LINK = re.compile(
    r"\]\(\s*(" + _DEST + r")(?:\s+(?:\"[^\"]*\"|'[^']*'|\([^)]*\)))?\s*\)"
)
_AUTOLINK = re.compile(r"<([A-Za-z][A-Za-z0-9.+-]{1,31}:[^\s<>]*)>")
_REF_DEF = re.compile(r"^ {0,3}\[(?!\^)([^\]]+)\]:[ \t]*(<[^<>\n]*>|\S+)")
_BARE_URL = re.compile(r"https?://(?:[^\s<>()\[\]{}\"'`]|\([^\s<>()\"'`]*\))+")
_BARE_TRAILING = ".,;:!?*_~"

_HEADER = re.compile(r"^ {0,3}#{1,6}[ \t]")
_LIST_ITEM = re.compile(r"^\s*[-+*][ \t]")
_NUMBERED_ITEM = re.compile(r"^\s*\d+[.)][ \t]")
_BLOCKQUOTE = re.compile(r"^\s*>")
_TABLE_CELL = re.compile(r"^\s*:?-+:?\s*$")

_BOLD = re.compile(r"\*\*(?=\S)(.+?)(?<=\S)\*\*|(?<![^\W_])__(?=\S)(.+?)(?<=\S)__(?![^\W_])")
_ITALIC_STAR = re.compile(r"(?<!\*)\*(?=[^\s*])(.+?)(?<=[^\s*])\*(?!\*)")
_ITALIC_UNDERSCORE = re.compile(r"(?<![^\W_])_(?=[^\s_])(.+?)(?<=[^\s_])_(?![^\W_])")


class MarkdownDecodeError(ValueError):
    """Raised when document bytes are not valid UTF-8."""

    def __init__(self, offset: int, reason: str, label: str | None = None):
        self.offset = offset
        self.reason = reason
        self.label = label
        where = f"{label}: " if label else ""
        super().__init__(f"{where}invalid UTF-8 at byte offset {offset}: {reason}")


@dataclass(frozen=True)
class CodeBlock:
    index: int
    info_string: str | None
    raw_lines: tuple[str, ...]
    normalized_lines: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "info_string": self.info_string,
            "raw_lines": list(self.raw_lines),
            "normalized_lines": list(self.normalized_lines),
        }


@dataclass(frozen=True)
class DocumentStructure:
    code_blocks: tuple[CodeBlock, ...] = ()
    urls: frozenset[str] = frozenset()
    element_counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(CATEGORIES, 0))
    byte_size: int = 0

    @property
    def n_code_blocks(self) -> int:
        return len(self.code_blocks)

    def to_dict(self) -> dict:
        return {
            "byte_size": self.byte_size,
            "code_blocks": [b.to_dict() for b in self.code_blocks],
            "element_counts": {k: self.element_counts[k] for k in CATEGORIES},
            "urls": sorted(self.urls),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)


def decode_document(data: Union[str, bytes], label: str | None = None) -> str:
    """Return ``data`` as text, decoding bytes strictly as UTF-8."""
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MarkdownDecodeError(exc.start, exc.reason, label) from None


def normalize_code(raw_lines: Iterable[str]) -> list[str]:
    """Drop comment/output lines (leading ``#``, ``$`` or ``*``) and trailing whitespace."""
    out = []
    for line in raw_lines:
        stripped = line.lstrip()
        if stripped.startswith(_COMMENT_LEAD):
            continue
        out.append(line.rstrip())
    return out


def _split_lines(text: str) -> list[str]:
    lines = re.split(r"\r\n|\r|\n", text)
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def fence_regions(lines: list[str]) -> list[tuple[int, int, str | None]]:
    """Locate fenced blocks as ``(open_line, close_line, info)`` index triples.

    ``close_line`` equals ``len(lines)`` for a fence left open at end of input.
    """
    regions = []
    i = 0
    while i < len(lines):
        m = _FENCE_OPEN.match(lines[i])
        if m is None or (m.group(2)[0] == "`" and "`" in m.group(3)):
            i += 1
            continue
        fence = m.group(2)
        closing = re.compile(r"^ {0,3}" + re.escape(fence[0]) + "{" + str(len(fence)) + r",}[ \t]*$")
        start = i
        i += 1
        while i < len(lines) and not closing.match(lines[i]):
            i += 1
        regions.append((start, i, m.group(3).strip() or None))
        i += 1
    return regions


def split_fences(text: str) -> tuple[list[tuple[str | None, list[str]]], list[str]]:
    """Separate fenced code blocks from prose.

    Returns ``(blocks, prose_lines)`` where each block is ``(info, lines)``.
    An unclosed fence swallows the rest of the document as one block.
    """
    lines = _split_lines(text)
    blocks = []
    prose = []
    prev = 0
    for start, end, info in fence_regions(lines):
        prose.extend(lines[prev:start])
        blocks.append((info, lines[start + 1:end]))
        prev = end + 1
    prose.extend(lines[prev:])
    return blocks, prose


def _mask_inline_code(line: str) -> str:
    return _INLINE_CODE.sub(lambda m: _MASK, line)


def _clean_url(url: str) -> str:
    return url.strip().strip("<>").strip()


def _link_spans(line: str) -> tuple[list[str], list[tuple[int, int]]]:
    """URLs from explicit link syntax on one masked prose line, plus their spans."""
    urls = []
    spans = []
    m = _REF_DEF.match(line)
    if m:
        urls.append(m.group(2))
        spans.append(m.span(2))
    for pattern in (_INLINE_LINK, _AUTOLINK):
        for m in pattern.finditer(line):
            urls.append(m.group(1))
            spans.append(m.span(1))
    return urls, spans


def _blank_spans(line: str, spans: list[tuple[int, int]]) -> str:
    chars = list(line)
    for start, end in spans:
        for k in range(start, end):
            chars[k] = _MASK
    return "".join(chars)


def _scan_urls(line: str) -> tuple[list[str], str]:
    """Collect URLs on a masked prose line; return them and the line with URLs blanked."""
    found, spans = _link_spans(line)
    remaining = _blank_spans(line, spans)
    for m in _BARE_URL.finditer(remaining):
        url = m.group(0).rstrip(_BARE_TRAILING)
        found.append(url)
        spans.append((m.start(), m.start() + len(url)))
    urls = [u for u in (_clean_url(u) for u in found) if u]
    return urls, _blank_spans(line, spans)


def _mask_prose(prose: list[str]) -> list[str]:
    return [_mask_inline_code(_ESCAPED.sub(_MASK, line)) for line in prose]


def extract_urls(text: str) -> set[str]:
    """All link targets outside code: inline, image, autolink, reference and bare URLs."""
    urls: set[str] = set()
    _, prose = split_fences(decode_document(text))
    for line in _mask_prose(prose):
        found, _ = _scan_urls(line)
        urls.update(found)
    return urls


def _is_table_separator(line: str) -> bool:
    s = line.strip()
    if "|" not in s or "-" not in s:
        return False
    if s.startswith("|"):
        s = s[1:]
    if s.endswith("|"):
        s = s[:-1]
    cells = s.split("|")
    return bool(cells) and all(_TABLE_CELL.match(c) for c in cells)


def count_line_elements(line: str, counts: dict[str, int]) -> None:
    """Add the elements on one masked, URL-blanked prose line to ``counts``."""
    if _HEADER.match(line):
        counts["headers"] += 1
    if _BLOCKQUOTE.match(line):
        counts["blockquotes"] += 1
        line = _BLOCKQUOTE.sub("", line, count=1)
    if _is_table_separator(line):
        counts["tables"] += 1
        return
    m = _LIST_ITEM.match(line)
    if m:
        counts["lists"] += 1
        line = line[m.end():]
    elif _NUMBERED_ITEM.match(line):
        counts["numbered_lists"] += 1

    bold = 0

    def _drop_bold(m: re.Match) -> str:
        nonlocal bold
        bold += 1
        return _MASK + (m.group(1) or m.group(2)) + _MASK

    line = _BOLD.sub(_drop_bold, line)
    counts["bold"] += bold
    counts["italic"] += len(_ITALIC_STAR.findall(line)) + len(_ITALIC_UNDERSCORE.findall(line))


def extract_structure(text: Union[str, bytes], label: str | None = None) -> DocumentStructure:
    """Extract the code/URL/formatting skeleton of one Markdown document.

    ``text`` may be ``str`` or UTF-8 ``bytes``; invalid bytes raise
    :class:`MarkdownDecodeError` carrying the failing offset.
    """
    decoded = decode_document(text, label)
    blocks, prose = split_fences(decoded)
    code_blocks = tuple(
        CodeBlock(
            index=i,
            info_string=info,
            raw_lines=tuple(body),
            normalized_lines=tuple(normalize_code(body)),
        )
        for i, (info, body) in enumerate(blocks)
    )
    urls: set[str] = set()
    counts = dict.fromkeys(CATEGORIES, 0)
    for line in _mask_prose(prose):
        found, blanked = _scan_urls(line)
        urls.update(found)
        count_line_elements(blanked, counts)
    byte_size = len(text) if isinstance(text, bytes) else len(decoded.encode("utf-8"))
    return DocumentStructure(
        code_blocks=code_blocks,
        urls=frozenset(urls),
        element_counts=counts,
        byte_size=byte_size,
    )
