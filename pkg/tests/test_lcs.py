"""Lexical content score: hand-computed values, properties, aggregation."""

import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lemurkit.lcs import LcsResult, aggregate_lcs, bow_vectorize, lcs_score, year_bin
from lemurkit.textnorm import normalize_text


def cosine_oracle(a: Counter, b: Counter) -> float:
    """Independent cosine over the union vocabulary, fsum-based."""
    vocab = sorted(set(a) | set(b))
    dot = math.fsum(a.get(t, 0) * b.get(t, 0) for t in vocab)
    na = math.sqrt(math.fsum(a.get(t, 0) ** 2 for t in vocab))
    nb = math.sqrt(math.fsum(b.get(t, 0) ** 2 for t in vocab))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


tokens_strategy = st.lists(
    st.sampled_from(["a", "b", "c", "de", "fg", "$100", "x1"]), min_size=0, max_size=40
)


class TestBowVectorize:
    def test_counts(self):
        assert bow_vectorize("a b a") == Counter({"a": 2, "b": 1})

    def test_empty(self):
        assert bow_vectorize("") == Counter()

    def test_normalized_currency(self):
        text = normalize_text("$ 100 $ 100")
        assert bow_vectorize(text) == Counter({"$100": 2})

    def test_total_equals_token_count(self):
        text = normalize_text("one two two three")
        assert sum(bow_vectorize(text).values()) == text.token_count


class TestLcsScore:
    def test_identity_is_one(self):
        bow = bow_vectorize("the quick brown fox the")
        assert lcs_score(bow, bow).score == pytest.approx(1.0, abs=1e-12)

    def test_hand_case(self):
        result = lcs_score(Counter({"a": 2, "b": 1}), Counter({"a": 1, "b": 2}))
        assert result.score == pytest.approx(0.8, abs=1e-9)
        assert result.shared_vocab == 2
        assert not result.empty_side_flag

    def test_disjoint_is_zero(self):
        result = lcs_score(Counter({"a": 1}), Counter({"b": 1}))
        assert result.score == 0.0
        assert result.shared_vocab == 0

    def test_empty_side_flag(self):
        result = lcs_score(Counter(), Counter({"a": 1}))
        assert result.score == 0.0
        assert result.empty_side_flag
        assert lcs_score(Counter({"a": 1}), Counter()).empty_side_flag
        assert lcs_score(Counter(), Counter()).empty_side_flag

    @given(tokens_strategy, tokens_strategy)
    @settings(max_examples=300, deadline=None)
    def test_matches_oracle_and_symmetry(self, words_a, words_b):
        a, b = Counter(words_a), Counter(words_b)
        res_ab, res_ba = lcs_score(a, b), lcs_score(b, a)
        assert res_ab.score == pytest.approx(res_ba.score, abs=1e-12)
        assert 0.0 <= res_ab.score <= 1.0
        assert res_ab.score == pytest.approx(cosine_oracle(a, b), abs=1e-12)

    @given(tokens_strategy.filter(bool))
    @settings(max_examples=200, deadline=None)
    def test_permutation_invariance(self, words):
        shuffled = list(words)
        random.Random(0).shuffle(shuffled)
        reference = Counter(["a", "b", "c"])
        assert lcs_score(Counter(words), reference).score == pytest.approx(
            lcs_score(Counter(shuffled), reference).score, abs=0
        )

    def test_scalar_multiple_scores_one(self):
        base = Counter({"a": 2, "b": 3, "c": 1})
        scaled = Counter({t: 4 * c for t, c in base.items()})
        assert lcs_score(base, scaled).score == pytest.approx(1.0, abs=1e-12)

    def test_non_multiple_scores_below_one(self):
        assert lcs_score(Counter({"a": 1, "b": 1}), Counter({"a": 1, "b": 2})).score < 1.0


class TestAggregate:
    def test_two_item_mean(self):
        out = aggregate_lcs([("en", 1961, 0.9), ("en", 1963, 0.7)])
        assert len(out) == 1
        agg = out[0]
        assert (agg.language, agg.year_bin, agg.count) == ("en", 1960, 2)
        assert agg.mean_score == pytest.approx(0.8)

    def test_languages_grouped_separately(self):
        out = aggregate_lcs([("en", 1961, 0.9), ("mt", 1961, 0.5)])
        assert [(a.language, a.year_bin) for a in out] == [("en", 1960), ("mt", 1960)]

    def test_bin_edges(self):
        out = aggregate_lcs([("en", 1964, 1.0), ("en", 1965, 0.0)])
        assert [(a.year_bin, a.mean_score) for a in out] == [(1960, 1.0), (1965, 0.0)]

    def test_accepts_result_objects(self):
        result = LcsResult(score=0.5, shared_vocab=3, empty_side_flag=False)
        out = aggregate_lcs([("en", 2000, result)])
        assert out[0].mean_score == pytest.approx(0.5)

    def test_year_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            aggregate_lcs([("en", 1899, 0.5)])
        with pytest.raises(ValueError):
            aggregate_lcs([("en", 2101, 0.5)])

    def test_binning_against_independent_rule(self):
        # Oracle: subtract the year's remainder mod 5.
        for year in range(1900, 2101, 7):
            assert year_bin(year) == year - (year % 5)
