"""Corpus loading, metadata splitting, split assignment, pair building."""

import json
import math

import pytest

from conftest import make_act, make_bilingual_corpus, write_jsonl
from lemurkit.corpus import (
    BoundaryRules,
    CorpusError,
    LegalAct,
    PositiveGroup,
    QueryDocPair,
    SplitManifest,
    assign_splits,
    build_pairs,
    group_from_json,
    group_to_json,
    load_corpus,
    pair_from_json,
    pair_to_json,
    split_metadata,
)


def act(celex="31999L0001", language="en", year=1999, pages=None):
    pages = pages or ((1, "metadata block here\nArticle 1\nthe real body"),)
    return LegalAct(celex_id=celex, language=language, year=year, pages=tuple(pages))


class TestLegalAct:
    def test_full_text_joins_pages(self):
        a = act(pages=((1, "one"), (2, "two")))
        assert a.full_text == "one\ntwo"

    def test_language_lowercased(self):
        assert act(language="EN").language == "en"

    def test_bad_language_rejected(self):
        with pytest.raises(CorpusError, match="2-letter"):
            act(language="eng")

    def test_empty_pages_rejected(self):
        with pytest.raises(CorpusError, match="pages"):
            LegalAct(celex_id="x", language="en", year=2000, pages=())

    def test_non_increasing_pages_rejected(self):
        with pytest.raises(CorpusError, match="increasing"):
            act(pages=((2, "a"), (1, "b")))

    def test_empty_celex_rejected(self):
        with pytest.raises(CorpusError, match="celex"):
            act(celex="")


class TestLoadCorpus:
    def test_counts_preserved(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [make_act(0, "en"), make_act(1, "en")])
        acts, diags = load_corpus([path])
        assert len(acts) == 2 and diags == []

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text("")
        acts, diags = load_corpus([path])
        assert acts == [] and diags == []

    def test_malformed_line_skipped_with_diagnostic(self, tmp_path):
        path = tmp_path / "m.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps(make_act(0, "en")) + "\n")
            fh.write("{not json}\n")
            fh.write(json.dumps({"celex_id": "x"}) + "\n")
        acts, diags = load_corpus([path])
        assert len(acts) == 1
        assert len(diags) == 2
        assert all(str(path) in d for d in diags)

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            load_corpus([tmp_path / "missing.jsonl"])


class TestSplitMetadata:
    def test_boundary_at_article_heading(self):
        a = act(pages=((1, "intro metadata\nmore intro\nArticle 1\nbody text"),))
        pair = split_metadata(a)
        assert pair.query == "intro metadata\nmore intro"
        assert pair.document.startswith("Article 1")
        assert "body text" in pair.document

    def test_translated_headings(self):
        cases = {
            "de": "Artikel 1",
            "fr": "Article premier",
            "lv": "1. pants",
            "mt": "Artikolu 1",
            "fi": "1 artikla",
        }
        for lang, heading in cases.items():
            a = act(language=lang, pages=((1, f"intro\n{heading}\nbody"),))
            pair = split_metadata(a)
            assert pair.query == "intro"
            assert pair.document.startswith(heading)

    def test_markdown_decorated_heading(self):
        a = act(pages=((1, "intro\n# Article 1\nbody"),))
        assert split_metadata(a).query == "intro"

    def test_article_ten_does_not_match(self):
        a = act(pages=((1, "intro"), (2, "Article 10\nbody")))
        pair = split_metadata(a)
        # No "Article 1" boundary: falls back to the page split.
        assert pair.query == "intro"
        assert pair.document.startswith("Article 10")

    def test_boundary_at_start_rejected(self):
        a = act(pages=((1, "Article 1\nbody"),))
        with pytest.raises(CorpusError, match="empty query"):
            split_metadata(a)

    def test_fallback_uses_first_page(self):
        a = act(pages=((1, "metadata only"), (2, "body page"), (3, "more body")))
        pair = split_metadata(a)
        assert pair.query == "metadata only"
        assert pair.document == "body page\nmore body"

    def test_single_page_without_boundary_rejected(self):
        a = act(pages=((1, "no heading anywhere"),))
        with pytest.raises(CorpusError, match="no document"):
            split_metadata(a)

    def test_empty_first_page_without_boundary_rejected(self):
        a = act(pages=((1, "   "), (2, "body")))
        with pytest.raises(CorpusError, match="empty first page"):
            split_metadata(a)

    def test_content_preserved_across_split(self):
        a = act(pages=((1, "intro metadata\nArticle 1\nbody text here"), (2, "annex")))
        pair = split_metadata(a)
        assert "".join(a.full_text.split()) == "".join(
            (pair.query + " " + pair.document).split()
        )

    def test_custom_rules_file(self, tmp_path):
        rules_path = tmp_path / "rules.json"
        rules_path.write_text(
            json.dumps({"language_patterns": {"en": [r"BEGIN\s+BODY"]}, "fallback_patterns": []})
        )
        rules = BoundaryRules.from_file(rules_path)
        a = act(pages=((1, "intro\nBEGIN BODY rest"),))
        assert split_metadata(a, rules).query == "intro"


class TestAssignSplits:
    def test_exact_division(self):
        manifest = assign_splits([f"a{i}" for i in range(10)], (0.6, 0.2, 0.2), seed=1)
        labels = list(manifest.assignment.values())
        assert (labels.count("train"), labels.count("val"), labels.count("test")) == (6, 2, 2)

    def test_deterministic(self):
        ids = [f"a{i}" for i in range(50)]
        m1 = assign_splits(ids, (0.6, 0.2, 0.2), seed=7)
        m2 = assign_splits(ids, (0.6, 0.2, 0.2), seed=7)
        assert m1.assignment == m2.assignment
        assert m1.to_json() == m2.to_json()

    def test_seed_changes_assignment(self):
        ids = [f"a{i}" for i in range(50)]
        m1 = assign_splits(ids, seed=1)
        m2 = assign_splits(ids, seed=2)
        assert m1.assignment != m2.assignment

    def test_largest_remainder_rounding(self):
        # 7 acts at (0.6, 0.2, 0.2): floors (4,1,1), fractions (.2,.4,.4);
        # the leftover goes to val (earlier label wins the tie).
        manifest = assign_splits([f"a{i}" for i in range(7)], (0.6, 0.2, 0.2), seed=3)
        labels = list(manifest.assignment.values())
        assert (labels.count("train"), labels.count("val"), labels.count("test")) == (4, 2, 1)

    def test_counts_within_one_of_exact(self):
        # Enumeration over sizes: largest-remainder is never off by more
        # than one from the exact product.
        for n in range(1, 40):
            manifest = assign_splits([f"a{i}" for i in range(n)], (0.6, 0.2, 0.2), seed=5)
            labels = list(manifest.assignment.values())
            for label, ratio in zip(("train", "val", "test"), (0.6, 0.2, 0.2)):
                count = labels.count(label)
                assert abs(count - ratio * n) < 1.0 or count in (
                    math.floor(ratio * n),
                    math.ceil(ratio * n),
                )

    def test_duplicate_ids_rejected(self):
        with pytest.raises(CorpusError, match="duplicate"):
            assign_splits(["a", "b", "a"])

    def test_bad_ratios_rejected(self):
        with pytest.raises(CorpusError, match="sum to 1"):
            assign_splits(["a"], (0.5, 0.2, 0.2))
        with pytest.raises(CorpusError, match="positive"):
            assign_splits(["a"], (1.0, 0.2, -0.2))

    def test_assignment_depends_only_on_act_ids(self):
        # The same id set in a different order produces the same manifest.
        ids = [f"a{i}" for i in range(20)]
        m1 = assign_splits(ids, seed=9)
        m2 = assign_splits(list(reversed(ids)), seed=9)
        assert m1.assignment == m2.assignment

    def test_manifest_round_trip(self, tmp_path):
        manifest = assign_splits([f"a{i}" for i in range(10)], seed=4)
        path = tmp_path / "manifest.json"
        manifest.save(path)
        loaded = SplitManifest.load(path)
        assert loaded == manifest


class TestBuildPairs:
    @pytest.fixture
    def acts_and_manifest(self):
        records = make_bilingual_corpus(10)
        acts = [
            LegalAct(
                celex_id=r["celex_id"],
                language=r["language"],
                year=r["year"],
                pages=tuple((p["page"], p["text"]) for p in r["pages"]),
            )
            for r in records
        ]
        manifest = assign_splits(sorted({a.celex_id for a in acts}), seed=0)
        return acts, manifest

    def test_mono_one_pair_per_act(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        pairs, diags = build_pairs(acts, manifest, "mono", "en")
        assert len(pairs) == 10
        assert diags == []
        assert all(isinstance(p, QueryDocPair) and p.language == "en" for p in pairs)
        assert all(p.split in ("train", "val", "test") for p in pairs)

    def test_bilingual_two_groups_per_act(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        groups, diags = build_pairs(acts, manifest, "bilingual", ("en", "lv"))
        assert len(groups) == 20
        assert diags == []
        by_act = {}
        for g in groups:
            assert isinstance(g, PositiveGroup)
            assert len(g.positives) == 2
            assert {lang for lang, _ in g.positives} == {"en", "lv"}
            by_act.setdefault(g.act_id, set()).add(g.query_language)
        assert all(langs == {"en", "lv"} for langs in by_act.values())

    def test_bilingual_skips_missing_version(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        only_en = [a for a in acts if not (a.language == "lv" and a.celex_id.endswith("0003"))]
        groups, diags = build_pairs(only_en, manifest, "bilingual", ("en", "lv"))
        assert len(groups) == 18
        assert len(diags) == 1 and "missing language version" in diags[0]

    def test_own_language_document_is_positive(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        groups, _ = build_pairs(acts, manifest, "bilingual", ("en", "lv"))
        for g in groups:
            assert any(lang == g.query_language for lang, _ in g.positives)

    def test_split_filter(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        pairs, _ = build_pairs(acts, manifest, "mono", "en", split_filter="test")
        test_ids = manifest.ids_for("test")
        assert {p.act_id for p in pairs} == test_ids

    def test_unknown_mode_rejected(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        with pytest.raises(CorpusError, match="mode"):
            build_pairs(acts, manifest, "trilingual", ("en", "lv"))

    def test_test_split_aligned_across_languages(self, acts_and_manifest):
        acts, manifest = acts_and_manifest
        en_pairs, _ = build_pairs(acts, manifest, "mono", "en")
        lv_pairs, _ = build_pairs(acts, manifest, "mono", "lv")
        en_test = {p.act_id for p in en_pairs if p.split == "test"}
        lv_test = {p.act_id for p in lv_pairs if p.split == "test"}
        assert en_test == lv_test


class TestSerializationHelpers:
    def test_pair_round_trip(self):
        pair = QueryDocPair(
            act_id="a", language="en", split="train", query="q", document="d"
        )
        assert pair_from_json(pair_to_json(pair)) == pair

    def test_group_round_trip(self):
        group = PositiveGroup(
            act_id="a",
            query_language="en",
            query="q",
            positives=(("en", "d1"), ("lv", "d2")),
        )
        assert group_from_json(group_to_json(group)) == group

    def test_pair_requires_nonempty_sides(self):
        with pytest.raises(CorpusError):
            QueryDocPair(act_id="a", language="en", split="train", query="", document="d")

    def test_group_requires_own_language_positive(self):
        with pytest.raises(CorpusError, match="missing from positives"):
            PositiveGroup(
                act_id="a", query_language="en", query="q", positives=(("lv", "d"),)
            )
