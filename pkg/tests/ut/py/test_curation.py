# Copyright (c) cmlab Contributors.
# This program is free software, you can redistribute it and/or modify it under the terms and conditions of
# the Apache License, Version 2.0 (the "License").
# Please refer to the License for details. You may not use this file except in compliance with the License.
# THIS SOFTWARE IS PROVIDED ON AN "AS IS" BASIS, WITHOUT WARRANTIES OF ANY KIND, EITHER EXPRESS OR IMPLIED,
# INCLUDING BUT NOT LIMITED TO NON-INFRINGEMENT, MERCHANTABILITY, OR FITNESS FOR A PARTICULAR PURPOSE.
# See LICENSE in the root of the software repository for the full text of the License.
# -----------------------------------------------------------------------------------------------------------
"""Tests for perturbations, n-gram mining, pruning and stratified splits."""

import logging
from collections import Counter

import pytest
from cmlab.corpus_model import AnnotationTriple, LanguageTag, Perturbation, RatingSummary
from cmlab.curation import (
    PerturbSpec,
    Split,
    delete_count_from_fraction,
    extract_mixed_ngrams,
    longest_mono_span,
    perturb_backtranslate,
    perturb_corpus,
    perturb_delete,
    perturb_swap,
    prune_by_disagreement,
    rating_bin,
    sample_hash,
    stratified_split,
)
from cmlab.errors import CmlabError, PerturbationError, TranslatorError
from cmlab.translators import DictionaryTranslator, IdentityTranslator


def _surfaces(sentence):
    return [t.surface for t in sentence.tokens]


class TestSeeding:
    def test_hash_depends_on_seed_and_id(self):
        assert sample_hash(0, "s1") == sample_hash(0, "s1")
        assert sample_hash(0, "s1") != sample_hash(1, "s1")
        assert sample_hash(0, "s1") != sample_hash(0, "s2")

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(CmlabError):
            PerturbSpec(Perturbation.SWAP, seed=seed)


class TestSwap:
    def test_two_tokens_always_swap(self, make_sentence):
        for seed in range(5):
            assert _surfaces(perturb_swap(make_sentence("a/a b/b"), 1, seed)) == ["b", "a"]

    def test_multiset_preserved_two_positions_changed(self, make_sentence):
        sentence = make_sentence("a/a b/b c/a d/b")
        out = perturb_swap(sentence, 1, seed=7)
        assert Counter(_surfaces(out)) == Counter(_surfaces(sentence))
        assert sum(x != y for x, y in zip(_surfaces(out), _surfaces(sentence))) == 2
        assert out.perturbation is Perturbation.SWAP
        assert out.text == " ".join(_surfaces(out))

    @pytest.mark.parametrize("length", range(2, 11))
    def test_multiset_preserved_across_seeds(self, make_lids, length):
        sentence = make_lids(("abn" * 4)[:length])
        before = Counter((t.surface, t.lid) for t in sentence.tokens)
        for seed in range(100):
            out = perturb_swap(sentence, 1, seed)
            assert Counter((t.surface, t.lid) for t in out.tokens) == before
            assert len(out.tokens) == length

    def test_reproducible(self, make_lids):
        sentence = make_lids("ababababab")
        assert perturb_swap(sentence, 3, 11) == perturb_swap(sentence, 3, 11)

    def test_single_token(self, make_sentence):
        with pytest.raises(PerturbationError):
            perturb_swap(make_sentence("a/a"), 1, 0)

    def test_annotation_dropped(self, make_sentence):
        import dataclasses  # noqa: PLC0415

        rated = dataclasses.replace(make_sentence("a/a b/b"), annotation=AnnotationTriple("s1", (4, 4, 4)))
        assert perturb_swap(rated, 1, 0).annotation is None


class TestDelete:
    def test_outcomes_are_enumerable_and_reproducible(self, make_sentence):
        sentence = make_sentence("a/a b/b c/a")
        out = perturb_delete(sentence, 1, seed=3)
        assert _surfaces(out) in (["a", "b"], ["a", "c"], ["b", "c"])
        assert out == perturb_delete(sentence, 1, seed=3)

    @pytest.mark.parametrize(("spec", "count"), [("a/a b/b c/a", 3), ("a/a", 1), ("a/a b/b", 0)])
    def test_invalid_counts(self, make_sentence, spec, count):
        with pytest.raises(PerturbationError):
            perturb_delete(make_sentence(spec), count, 0)

    @pytest.mark.parametrize(("length", "expected"), [(2, 1), (10, 1), (14, 1), (15, 2), (40, 4)])
    def test_fraction_rounds_half_up(self, length, expected):
        assert delete_count_from_fraction(length, 0.1) == expected

    def test_fraction_keeps_one_token(self):
        assert delete_count_from_fraction(3, 0.9) == 2


class TestLongestMonoSpan:
    @pytest.mark.parametrize(
        ("lids", "expected"),
        [
            ("abbba", (1, 3, LanguageTag.LANG_B)),
            ("aabb", (0, 1, LanguageTag.LANG_A)),
            ("aanaaa", (3, 5, LanguageTag.LANG_A)),
        ],
    )
    def test_spans(self, make_lids, lids, expected):
        assert longest_mono_span(make_lids(lids)) == expected

    def test_only_neutral(self, make_lids):
        with pytest.raises(PerturbationError):
            longest_mono_span(make_lids("n"))


class TestBackTranslate:
    def test_identity_round_trip(self, make_sentence):
        sentence = make_sentence("maine/a movie/b dekhi/a")
        out = perturb_backtranslate(sentence, IdentityTranslator())
        assert out.text == sentence.text
        assert out.perturbation is Perturbation.BACK_TRANSLATE

    def test_inverse_stub_restores_span(self, make_sentence):
        sentence = make_sentence("maine/a research/b research/b kiya/a")
        out = perturb_backtranslate(sentence, DictionaryTranslator([("shodh", "research")]))
        assert _surfaces(out) == _surfaces(sentence)
        assert out.lids == sentence.lids
        assert all(t.pos is None for t in out.tokens[1:3])

    def test_romanised_words_take_script_lid(self, make_sentence):
        sentence = make_sentence("maine/a dekha/a kal/a movie/b")
        out = perturb_backtranslate(sentence, IdentityTranslator())
        assert _surfaces(out) == _surfaces(sentence)
        assert out.lids == [LanguageTag.LANG_B] * 4

    def test_native_script_words_take_script_lid(self, make_sentence):
        sentence = make_sentence("मैने/a देखा/a movie/b 5/n", script="norm")
        out = perturb_backtranslate(sentence, IdentityTranslator())
        assert out.lids == [LanguageTag.LANG_A, LanguageTag.LANG_A, LanguageTag.LANG_B, LanguageTag.NEUTRAL]

    def test_lossy_translation_changes_text(self, make_sentence):
        class Lossy:
            def translate(self, text, source, target):
                return "shodh" if target is LanguageTag.LANG_A else "study"

        out = perturb_backtranslate(make_sentence("maine/a research/b work/b kiya/a"), Lossy())
        assert _surfaces(out) == ["maine", "study", "kiya"]

    def test_failure_carries_span(self, make_sentence):
        class Broken:
            def translate(self, text, source, target):
                raise ConnectionError("offline")

        with pytest.raises(TranslatorError) as exc:
            perturb_backtranslate(make_sentence("maine/a research/b work/b kiya/a"), Broken())
        assert exc.value.span == "research work"

    def test_corpus_aborts_on_translator_failure(self, make_lids):
        class Broken:
            def translate(self, text, source, target):
                raise TranslatorError(text, "quota exceeded")

        with pytest.raises(TranslatorError):
            perturb_corpus([make_lids("ab")], PerturbSpec(Perturbation.BACK_TRANSLATE), Broken())


class TestPerturbCorpus:
    def test_skips_inapplicable_sentences(self, make_lids):
        corpus = [make_lids("a", "short"), make_lids("abab", "long")]
        out = perturb_corpus(corpus, PerturbSpec(Perturbation.SWAP, seed=1))
        assert [s.id for s in out] == ["long"]

    def test_parallel_matches_serial(self, make_lids):
        corpus = [make_lids("ab" * (i + 1), f"s{i}") for i in range(12)]
        spec = PerturbSpec(Perturbation.DELETE, seed=5)
        assert perturb_corpus(corpus, spec, jobs=3) == perturb_corpus(corpus, spec)


class TestNgrams:
    def test_both_bigrams_mixed(self, make_sentence):
        result = extract_mixed_ngrams([make_sentence("x/a y/b z/a")], 2)
        assert result == [(("x", "y"), 1), (("y", "z"), 1)]

    def test_monolingual_has_none(self, make_sentence):
        assert extract_mixed_ngrams([make_sentence("x/a y/a z/a")], 2) == []

    def test_shared_bigram_ranked_first(self, make_sentence):
        corpus = [make_sentence("ek/a movie/b", "s1"), make_sentence("ek/a movie/b dekho/a", "s2")]
        assert extract_mixed_ngrams(corpus, 2)[0] == (("ek", "movie"), 2)

    def test_neutral_does_not_make_mixing(self, make_sentence):
        assert extract_mixed_ngrams([make_sentence("x/a !/n")], 2) == []

    @pytest.mark.parametrize("n", [1, 5])
    def test_order_range(self, make_sentence, n):
        with pytest.raises(CmlabError):
            extract_mixed_ngrams([make_sentence("x/a y/b")], n)


class TestPrune:
    def test_boundary(self):
        records = [("keep", RatingSummary(3.0, 4)), ("drop", RatingSummary(3.0, 6))]
        assert prune_by_disagreement(records, 4) == ["keep"]

    def test_empty(self):
        assert prune_by_disagreement([], 4) == []


def _records(n):
    # Averages cycle through the four rating bins.
    return [(f"s{i:04d}", RatingSummary(1.5 + (i % 4), 0)) for i in range(n)]


class TestStratifiedSplit:
    def test_exact_sizes(self):
        assignment = stratified_split(_records(100), seed=3)
        sizes = assignment.sizes()
        assert (sizes[Split.TRAIN], sizes[Split.DEV], sizes[Split.TEST]) == (70, 10, 20)
        assert len(assignment) == 100

    def test_deterministic(self):
        assert stratified_split(_records(50), seed=9) == stratified_split(_records(50), seed=9)

    def test_seed_changes_membership(self):
        a = stratified_split(_records(100), seed=1)
        b = stratified_split(_records(100), seed=2)
        assert a.ids(Split.TRAIN) != b.ids(Split.TRAIN)

    def test_per_bin_train_share(self):
        records = _records(200)
        assignment = stratified_split(records, seed=4)
        by_bin = Counter()
        train_by_bin = Counter()
        for sid, summary in records:
            b = rating_bin(summary.average)
            by_bin[b] += 1
            train_by_bin[b] += assignment[sid] is Split.TRAIN
        for b, total in by_bin.items():
            assert abs(train_by_bin[b] / total - 0.7) <= 0.05

    def test_small_bin_warns(self, caplog):
        records = [(f"s{i}", RatingSummary(1.5 + i % 3, 0)) for i in range(30)] + [("lonely", RatingSummary(5.0, 0))]
        with caplog.at_level(logging.WARNING):
            stratified_split(records, seed=0)
        assert "cannot be represented" in caplog.text

    def test_bad_ratios(self):
        with pytest.raises(CmlabError):
            stratified_split(_records(10), ratios=(0.5, 0.5, 0.5))

    @pytest.mark.parametrize(("average", "expected"), [(1.0, 0), (1.99, 0), (2.0, 1), (4.5, 3), (5.0, 3)])
    def test_rating_bins(self, average, expected):
        assert rating_bin(average) == expected
