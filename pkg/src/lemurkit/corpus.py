"""Corpus ingestion, metadata/body splitting, and aligned split assignment.

Acts arrive as line-delimited JSON (one act per line, see ``act_from_json``).
Each act's introductory metadata block becomes the retrieval query and the
remaining legislative text becomes the document.  The boundary is the first
article heading in the act's language ("Article 1", "Artikel 1", "1. pants",
...); when no heading matches, the first page is taken as the query.

Split assignment works on act ids, which are shared across language
versions, so every translation of an act lands in the same train/val/test
bucket by construction.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

SPLIT_LABELS = ("train", "val", "test")
DEFAULT_RATIOS = (0.6, 0.2, 0.2)


class CorpusError(ValueError):
    """A record or act violates the corpus contract."""


# First-article headings per language, tried before the generic fallbacks.
# Lines may carry light markdown decoration (#, *, >, _) from OCR output.
_HEADING_PREFIX = r"^[#>*_ \t]*"
DEFAULT_ARTICLE_PATTERNS: dict[str, list[str]] = {
    "bg": [r"Член\s+1\b"],
    "cs": [r"Článek\s+1\b"],
    "da": [r"Artikel\s+1\b"],
    "de": [r"Artikel\s+1\b"],
    "el": [r"Άρθρο\s+1\b"],
    "en": [r"Article\s+1\b"],
    "es": [r"Art[íi]culo\s+1\b"],
    "et": [r"Artikkel\s+1\b"],
    "fi": [r"1\s+artikla\b"],
    "fr": [r"Article\s+(?:premier\b|1(?:er)?\b)"],
    "ga": [r"Airteagal\s+1\b"],
    "hr": [r"Članak\s+1\b"],
    "hu": [r"1\.\s*cikk\b"],
    "it": [r"Articolo\s+1\b"],
    "lt": [r"1\s+straipsnis\b"],
    "lv": [r"1\.\s*pants\b"],
    "mt": [r"Artikolu\s+1\b"],
    "nl": [r"Artikel\s+1\b"],
    "pl": [r"Artykuł\s+1\b"],
    "pt": [r"Artigo\s+1\b"],
    "ro": [r"Articolul\s+1\b"],
    "sk": [r"Článok\s+1\b"],
    "sl": [r"Člen\s+1\b"],
    "sv": [r"Artikel\s+1\b"],
}
DEFAULT_FALLBACK_PATTERNS = [r"Article\s+1\b"]


@dataclass(frozen=True)
class LegalAct:
    """One legislative act in one language: ordered pages of extracted text."""

    celex_id: str
    language: str
    year: int
    pages: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        if not self.celex_id:
            raise CorpusError("celex_id must be non-empty")
        if not (len(self.language) == 2 and self.language.isalpha()):
            raise CorpusError(f"language must be a 2-letter code, got {self.language!r}")
        object.__setattr__(self, "language", self.language.lower())
        pages = tuple((int(n), str(t)) for n, t in self.pages)
        object.__setattr__(self, "pages", pages)
        if not pages:
            raise CorpusError(f"{self.celex_id}: pages must be non-empty")
        numbers = [n for n, _ in pages]
        if any(a >= b for a, b in zip(numbers, numbers[1:])):
            raise CorpusError(f"{self.celex_id}: page numbers must be strictly increasing")

    @property
    def full_text(self) -> str:
        return "\n".join(text for _, text in self.pages)


@dataclass(frozen=True)
class QueryDocPair:
    """Metadata query plus body document for one act in one language."""

    act_id: str
    language: str
    split: str | None
    query: str
    document: str

    def __post_init__(self) -> None:
        if not self.query or not self.document:
            raise CorpusError(f"{self.act_id}: query and document must be non-empty")
        if self.split is not None and self.split not in SPLIT_LABELS:
            raise CorpusError(f"{self.act_id}: bad split label {self.split!r}")


@dataclass(frozen=True)
class PositiveGroup:
    """One query with every aligned language version of its act as a positive."""

    act_id: str
    query_language: str
    query: str
    positives: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.positives:
            raise CorpusError(f"{self.act_id}: positives must be non-empty")
        if all(lang != self.query_language for lang, _ in self.positives):
            raise CorpusError(
                f"{self.act_id}: query language {self.query_language!r} missing from positives"
            )


@dataclass(frozen=True)
class BoundaryRules:
    """Ordered per-language boundary patterns with generic fallbacks.

    Patterns are matched case-insensitively at line starts; the first
    pattern that matches anywhere wins, at its earliest occurrence.
    """

    language_patterns: dict[str, list[str]] = field(
        default_factory=lambda: dict(DEFAULT_ARTICLE_PATTERNS)
    )
    fallback_patterns: list[str] = field(
        default_factory=lambda: list(DEFAULT_FALLBACK_PATTERNS)
    )

    @classmethod
    def from_file(cls, path) -> "BoundaryRules":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            language_patterns=obj.get("language_patterns", {}),
            fallback_patterns=obj.get("fallback_patterns", []),
        )

    def _compiled(self, language: str) -> list[re.Pattern]:
        cache = self.__dict__.setdefault("_cache", {})
        if language not in cache:
            bodies = self.language_patterns.get(language, []) + self.fallback_patterns
            cache[language] = [
                re.compile(_HEADING_PREFIX + body, re.IGNORECASE | re.MULTILINE)
                for body in bodies
            ]
        return cache[language]

    def find_boundary(self, language: str, text: str) -> int | None:
        """Offset of the first boundary match, or None."""
        for pattern in self._compiled(language):
            match = pattern.search(text)
            if match:
                return match.start()
        return None


@dataclass(frozen=True)
class SplitManifest:
    """Deterministic act_id -> split assignment for a seed and ratio triple."""

    seed: int
    ratios: tuple[float, float, float]
    assignment: dict[str, str]

    def __post_init__(self) -> None:
        _check_ratios(self.ratios)
        for act_id, label in self.assignment.items():
            if label not in SPLIT_LABELS:
                raise CorpusError(f"{act_id}: bad split label {label!r}")

    def ids_for(self, label: str) -> set[str]:
        return {a for a, s in self.assignment.items() if s == label}

    def to_json(self) -> str:
        obj = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "assignment": self.assignment,
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "SplitManifest":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            seed=int(obj["seed"]),
            ratios=tuple(float(r) for r in obj["ratios"]),
            assignment=dict(obj["assignment"]),
        )


def _check_ratios(ratios) -> None:
    if len(ratios) != 3:
        raise CorpusError(f"expected 3 ratios, got {len(ratios)}")
    if any(r <= 0 for r in ratios):
        raise CorpusError(f"ratios must be positive: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1: {ratios}")


def act_from_json(obj: dict) -> LegalAct:
    """Validate one corpus record and build a LegalAct."""
    if not isinstance(obj, dict):
        raise CorpusError("record must be a JSON object")
    missing = {"celex_id", "language", "year", "pages"} - obj.keys()
    if missing:
        raise CorpusError(f"record missing fields: {sorted(missing)}")
    pages = obj["pages"]
    if not isinstance(pages, list) or not pages:
        raise CorpusError("pages must be a non-empty list")
    parsed = []
    for page in pages:
        if not isinstance(page, dict) or "page" not in page or "text" not in page:
            raise CorpusError("each page needs 'page' and 'text'")
        parsed.append((int(page["page"]), str(page["text"])))
    return LegalAct(
        celex_id=str(obj["celex_id"]),
        language=str(obj["language"]),
        year=int(obj["year"]),
        pages=tuple(parsed),
    )


def act_to_json(act: LegalAct) -> dict:
    return {
        "celex_id": act.celex_id,
        "language": act.language,
        "year": act.year,
        "pages": [{"page": n, "text": t} for n, t in act.pages],
    }


def load_corpus(paths) -> tuple[list[LegalAct], list[str]]:
    """Read corpus JSONL files; skip bad lines with one diagnostic each.

    An unreadable file raises; a malformed line only costs that record.
    """
    acts: list[LegalAct] = []
    diagnostics: list[str] = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    acts.append(act_from_json(json.loads(line)))
                except (json.JSONDecodeError, CorpusError, TypeError, ValueError) as exc:
                    diagnostics.append(f"{path}:{lineno}: skipped record: {exc}")
    return acts, diagnostics


def split_metadata(
    act: LegalAct,
    rules: BoundaryRules | None = None,
    split: str | None = None,
) -> QueryDocPair:
    """Cut an act into (metadata query, body document).

    The query is everything before the first boundary match; the document
    starts at the boundary marker.  Without a match, page one is the query
    and the remaining pages are the document.  Raises CorpusError if either
    side comes out empty.
    """
    rules = rules or BoundaryRules()
    full = act.full_text
    pos = rules.find_boundary(act.language, full)
    if pos is not None:
        query, document = full[:pos].strip(), full[pos:].strip()
        if not query:
            raise CorpusError(f"{act.celex_id}/{act.language}: boundary at start, empty query")
    else:
        query = act.pages[0][1].strip()
        document = "\n".join(text for _, text in act.pages[1:]).strip()
        if not query:
            raise CorpusError(f"{act.celex_id}/{act.language}: empty first page, no boundary")
    if not document:
        raise CorpusError(f"{act.celex_id}/{act.language}: no document text after split")
    return QueryDocPair(
        act_id=act.celex_id,
        language=act.language,
        split=split,
        query=query,
        document=document,
    )


def _hash_key(seed: int, act_id: str) -> str:
    return hashlib.sha256(f"{seed}:{act_id}".encode("utf-8")).hexdigest()


def assign_splits(
    act_ids,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> SplitManifest:
    """Assign act ids to train/val/test deterministically.

    Ids are ordered by a seeded hash, then cut at counts from
    largest-remainder rounding of the ratios; remainder ties go to the
    earlier label.  The same (ids, ratios, seed) always yields the same
    manifest, and because assignment keys on the language-independent act
    id, all translations of an act share one split.
    """
    act_ids = list(act_ids)
    if len(set(act_ids)) != len(act_ids):
        dupes = sorted({a for a in act_ids if act_ids.count(a) > 1})
        raise CorpusError(f"duplicate act_id(s): {dupes}")
    _check_ratios(ratios)

    n = len(act_ids)
    exact = [r * n for r in ratios]
    counts = [math.floor(e) for e in exact]
    leftovers = sorted(
        range(3), key=lambda i: (-(exact[i] - counts[i]), i)
    )[: n - sum(counts)]
    for i in leftovers:
        counts[i] += 1

    ordered = sorted(act_ids, key=lambda a: (_hash_key(seed, a), a))
    assignment: dict[str, str] = {}
    start = 0
    for label, count in zip(SPLIT_LABELS, counts):
        for act_id in ordered[start : start + count]:
            assignment[act_id] = label
        start += count
    return SplitManifest(seed=seed, ratios=tuple(ratios), assignment=assignment)


def build_pairs(
    acts: list[LegalAct],
    manifest: SplitManifest,
    mode: str,
    languages,
    rules: BoundaryRules | None = None,
    split_filter: str | None = None,
):
    """Build monolingual pairs or bilingual multi-positive groups.

    mode "mono" takes one language and emits one labeled QueryDocPair per
    act; mode "bilingual" takes two languages and emits one PositiveGroup
    per (act, query language) with both language documents as positives.
    Acts missing a required language version, rejected by the splitter, or
    absent from the manifest are skipped with a diagnostic.  Returns
    (items, diagnostics).
    """
    rules = rules or BoundaryRules()
    languages = [str(l).lower() for l in (
        [languages] if isinstance(languages, str) else list(languages)
    )]
    if split_filter is not None and split_filter not in SPLIT_LABELS:
        raise CorpusError(f"bad split filter {split_filter!r}")

    diagnostics: list[str] = []
    by_key: dict[tuple[str, str], LegalAct] = {}
    for act in acts:
        key = (act.celex_id, act.language)
        if key in by_key:
            diagnostics.append(f"{act.celex_id}/{act.language}: duplicate act, keeping first")
            continue
        by_key[key] = act

    def label_of(act_id: str) -> str | None:
        label = manifest.assignment.get(act_id)
        if label is None:
            diagnostics.append(f"{act_id}: not in split manifest, skipped")
        return label

    if mode == "mono":
        if len(languages) != 1:
            raise CorpusError("mono mode takes exactly one language")
        lang = languages[0]
        pairs: list[QueryDocPair] = []
        for (act_id, act_lang), act in by_key.items():
            if act_lang != lang:
                continue
            label = label_of(act_id)
            if label is None or (split_filter and label != split_filter):
                continue
            try:
                pairs.append(split_metadata(act, rules, split=label))
            except CorpusError as exc:
                diagnostics.append(str(exc))
        return pairs, diagnostics

    if mode == "bilingual":
        if len(languages) != 2 or languages[0] == languages[1]:
            raise CorpusError("bilingual mode takes two distinct languages")
        lang_a, lang_b = languages
        act_ids = sorted({act_id for act_id, _ in by_key})
        groups: list[PositiveGroup] = []
        for act_id in act_ids:
            version_a = by_key.get((act_id, lang_a))
            version_b = by_key.get((act_id, lang_b))
            if version_a is None or version_b is None:
                have = [l for l in (lang_a, lang_b) if (act_id, l) in by_key]
                diagnostics.append(
                    f"{act_id}: missing language version (have {have}), skipped"
                )
                continue
            label = label_of(act_id)
            if label is None or (split_filter and label != split_filter):
                continue
            try:
                split_a = split_metadata(version_a, rules, split=label)
                split_b = split_metadata(version_b, rules, split=label)
            except CorpusError as exc:
                diagnostics.append(str(exc))
                continue
            positives = (
                (lang_a, split_a.document),
                (lang_b, split_b.document),
            )
            for query_side in (split_a, split_b):
                groups.append(
                    PositiveGroup(
                        act_id=act_id,
                        query_language=query_side.language,
                        query=query_side.query,
                        positives=positives,
                    )
                )
        return groups, diagnostics

    raise CorpusError(f"unknown mode {mode!r} (use 'mono' or 'bilingual')")


def pair_to_json(pair: QueryDocPair) -> dict:
    return {
        "act_id": pair.act_id,
        "language": pair.language,
        "split": pair.split,
        "query": pair.query,
        "document": pair.document,
    }


def pair_from_json(obj: dict) -> QueryDocPair:
    return QueryDocPair(
        act_id=obj["act_id"],
        language=obj["language"],
        split=obj.get("split"),
        query=obj["query"],
        document=obj["document"],
    )


def group_to_json(group: PositiveGroup) -> dict:
    return {
        "act_id": group.act_id,
        "query_language": group.query_language,
        "query": group.query,
        "positives": [
            {"language": lang, "document": doc} for lang, doc in group.positives
        ],
    }


def group_from_json(obj: dict) -> PositiveGroup:
    return PositiveGroup(
        act_id=obj["act_id"],
        query_language=obj["query_language"],
        query=obj["query"],
        positives=tuple((p["language"], p["document"]) for p in obj["positives"]),
    )
