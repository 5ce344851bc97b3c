"""HTML stripping and deterministic text normalization.

The normalization pipeline runs in a fixed order: strip markup (if any),
lowercase, collapse whitespace, re-attach currency/sign characters to the
digits they precede, collapse runs of a repeated punctuation character.
The order matters for idempotence and is part of the contract.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from html.parser import HTMLParser

# Signs whose trailing whitespace is removed when a digit follows,
# e.g. "$ 100" -> "$100".  Extendable by callers of normalize_text.
DEFAULT_SIGNS = "$€£+-"

# Tags whose boundaries become newlines in the stripped text.  Everything
# else (span, b, a, ...) is treated as inline.
_BLOCK_TAGS = frozenset(
    """
    address article aside blockquote br caption dd details dir div dl dt
    fieldset figcaption figure footer form h1 h2 h3 h4 h5 h6 header hr html
    body head li main menu nav ol option p pre section summary table tbody
    td tfoot th thead title tr ul script style
    """.split()
)

# Element bodies that never contribute visible text.
_SKIP_CONTENT_TAGS = frozenset({"script", "style"})

_WS_RUN = re.compile(r"\s+")


@dataclass(frozen=True)
class NormalizedText:
    """Text after normalization plus its whitespace-token count."""

    text: str
    token_count: int


class _TextExtractor(HTMLParser):
    """Collects visible text, marking block-tag boundaries.

    Built on the stdlib parser, which recovers from broken markup instead
    of raising, so malformed tags degrade gracefully.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def _boundary(self) -> None:
        self.parts.append("\n")

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_CONTENT_TAGS:
            self._skip_depth += 1
        if tag in _BLOCK_TAGS:
            self._boundary()

    def handle_endtag(self, tag):
        if tag in _SKIP_CONTENT_TAGS and self._skip_depth > 0:
            self._skip_depth -= 1
        if tag in _BLOCK_TAGS:
            self._boundary()

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK_TAGS:
            self._boundary()

    def handle_data(self, data):
        if self._skip_depth == 0 and data:
            self.parts.append(data)


def strip_html(content: str) -> str:
    """Return the visible text of an HTML document.

    Tags, attributes, comments, and script/style bodies are dropped;
    block-level element boundaries become single newlines.  Input without
    any ``<`` character is returned verbatim.  Broken markup is handled
    best-effort; empty input yields empty output.
    """
    if "<" not in content:
        return content
    extractor = _TextExtractor()
    extractor.feed(content)
    extractor.close()
    text = "".join(extractor.parts)
    # Block boundaries stack up (e.g. </td></tr></table>); keep one newline.
    text = re.sub(r"[ \t]*\n[\s]*", "\n", text)
    return text.strip("\n")


def _collapse_repeated_punctuation(text: str) -> str:
    # Runs of the *same* punctuation character collapse to one occurrence;
    # mixed runs like "?!" are left alone.
    out: list[str] = []
    prev = ""
    for ch in text:
        if ch == prev and unicodedata.category(ch).startswith("P"):
            continue
        out.append(ch)
        prev = ch
    return "".join(out)


def normalize_text(text: str, signs: str = DEFAULT_SIGNS) -> NormalizedText:
    """Normalize text for lexical comparison.

    Lowercases, strips and collapses whitespace to single spaces, removes
    whitespace between a sign in ``signs`` and a following digit
    ("$ 100" -> "$100"), and collapses repeated punctuation ("..." -> ".").
    Idempotent: normalizing the result again is a no-op.
    """
    text = text.lower()
    text = _WS_RUN.sub(" ", text).strip()
    if signs:
        sign_class = re.escape(signs)
        text = re.sub(rf"([{sign_class}]) (?=\d)", r"\1", text)
    text = _collapse_repeated_punctuation(text)
    return NormalizedText(text=text, token_count=len(text.split()))


def tokenize(text: str | NormalizedText) -> list[str]:
    """Split normalized text into maximal non-whitespace runs."""
    if isinstance(text, NormalizedText):
        text = text.text
    return text.split()
