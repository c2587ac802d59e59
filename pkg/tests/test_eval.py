import numpy as np
import pytest

from lexner import (EntitySpan, TagScheme, bucket_by_length, evaluation_report,
                    extract_entities, per_type_prf1, prf1, spans_to_tags)
from lexner.corpus import Sentence


def idx(scheme, *tags):
    return [scheme.index_of(t) for t in tags]


class TestExtractEntities:
    def test_bioes_pair(self, bioes_scheme):
        spans, bad = extract_entities(idx(bioes_scheme, "B-LOC", "E-LOC", "O"), bioes_scheme)
        assert spans == {EntitySpan(1, 2, "LOC")} and bad == 0

    def test_all_outside(self, bioes_scheme):
        spans, bad = extract_entities(idx(bioes_scheme, "O", "O"), bioes_scheme)
        assert spans == set() and bad == 0

    def test_dangling_inside_counted(self, bioes_scheme):
        spans, bad = extract_entities(idx(bioes_scheme, "I-LOC", "O"), bioes_scheme)
        assert spans == set() and bad == 1

    def test_unclosed_begin_counted(self, bioes_scheme):
        spans, bad = extract_entities(
            idx(bioes_scheme, "B-LOC", "I-LOC", "O"), bioes_scheme)
        assert spans == set() and bad == 1

    def test_singleton(self, bioes_scheme):
        spans, bad = extract_entities(idx(bioes_scheme, "S-PER"), bioes_scheme)
        assert spans == {EntitySpan(1, 1, "PER")} and bad == 0

    def test_bio_spans(self):
        scheme = TagScheme("BIO", ("LOC", "PER"))
        tags = idx(scheme, "B-LOC", "I-LOC", "O", "B-PER", "I-LOC")
        spans, bad = extract_entities(tags, scheme)
        assert spans == {EntitySpan(1, 2, "LOC"), EntitySpan(4, 4, "PER")}
        assert bad == 1   # the trailing I-LOC run

    def test_round_trip_with_encoding(self, bioes_scheme):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            # random well-formed tagging via random non-overlapping spans
            spans = set()
            occupied = np.zeros(n, dtype=bool)
            for _ in range(int(rng.integers(0, 4))):
                a = int(rng.integers(1, n + 1))
                b = min(n, a + int(rng.integers(0, 3)))
                if not occupied[a - 1:b].any():
                    occupied[a - 1:b] = True
                    spans.add(EntitySpan(a, b, str(rng.choice(["LOC", "PER"]))))
            tags = spans_to_tags(spans, n, bioes_scheme)
            got, bad = extract_entities(tags, bioes_scheme)
            assert got == spans and bad == 0
            assert spans_to_tags(got, n, bioes_scheme) == tags


class TestSpansToTags:
    def test_overlap_rejected(self, bioes_scheme):
        with pytest.raises(ValueError):
            spans_to_tags({EntitySpan(1, 3, "LOC"), EntitySpan(3, 4, "PER")}, 5, bioes_scheme)

    def test_out_of_range_rejected(self, bioes_scheme):
        with pytest.raises(ValueError):
            spans_to_tags({EntitySpan(2, 6, "LOC")}, 5, bioes_scheme)


class TestPrf1:
    def test_half_right(self):
        gold = {"a": {EntitySpan(1, 2, "PER"), EntitySpan(4, 5, "LOC")}}
        pred = {"a": {EntitySpan(1, 2, "PER"), EntitySpan(4, 6, "LOC")}}
        assert prf1(gold, pred) == (0.5, 0.5, 0.5)

    def test_perfect(self):
        gold = {"a": {EntitySpan(1, 2, "PER")}, "b": {EntitySpan(3, 3, "LOC")}}
        assert prf1(gold, gold) == (1.0, 1.0, 1.0)

    def test_empty_pred_convention(self):
        gold = {"a": {EntitySpan(1, 2, "PER")}}
        assert prf1(gold, {"a": set()}) == (0.0, 0.0, 0.0)

    def test_relabeling_ids_invariant(self):
        rng = np.random.default_rng(1)
        gold, pred = {}, {}
        for k in range(20):
            gold[f"s{k}"] = {EntitySpan(int(a), int(a) + 1, "LOC")
                             for a in rng.integers(1, 8, size=rng.integers(0, 3))}
            pred[f"s{k}"] = {EntitySpan(int(a), int(a) + 1, "LOC")
                             for a in rng.integers(1, 8, size=rng.integers(0, 3))}
        renamed_gold = {f"x{k}": v for k, v in gold.items()}
        renamed_pred = {f"x{k}": v for k, v in pred.items()}
        assert prf1(gold, pred) == prf1(renamed_gold, renamed_pred)

    def test_bounds_and_harmonic_mean(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            gold = {"a": {EntitySpan(int(a), int(a), "X")
                          for a in rng.integers(1, 10, size=rng.integers(0, 5))}}
            pred = {"a": {EntitySpan(int(a), int(a), "X")
                          for a in rng.integers(1, 10, size=rng.integers(0, 5))}}
            p, r, f = prf1(gold, pred)
            assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0 and 0.0 <= f <= 1.0
            assert f <= max(p, r) + 1e-12
            if p > 0 and r > 0:
                assert abs(f - 2 * p * r / (p + r)) < 1e-12

    def test_per_type(self):
        gold = {"a": {EntitySpan(1, 2, "PER"), EntitySpan(4, 5, "LOC")}}
        pred = {"a": {EntitySpan(1, 2, "PER")}}
        by_type = per_type_prf1(gold, pred)
        assert by_type["PER"] == (1.0, 1.0, 1.0)
        assert by_type["LOC"] == (0.0, 0.0, 0.0)


def make_sentences(lengths):
    return [Sentence(tuple("甲" * n), None, f"s{k}") for k, n in enumerate(lengths)]


class TestBuckets:
    def test_six_sentences_six_buckets(self):
        sents = make_sentences([3, 1, 4, 2, 6, 5])
        buckets = bucket_by_length(sents, {}, {}, k=6)
        assert len(buckets) == 6
        assert all(b["sentences"] == 1 for b in buckets)
        assert [b["min_length"] for b in buckets] == [1, 2, 3, 4, 5, 6]

    def test_equal_lengths_one_effective_bucket(self):
        sents = make_sentences([4, 4, 4])
        buckets = bucket_by_length(sents, {}, {}, k=6)
        assert all(b["min_length"] == 4 and b["max_length"] == 4 for b in buckets)

    def test_600_random_lengths_balanced(self):
        rng = np.random.default_rng(3)
        sents = make_sentences(rng.integers(1, 60, size=600))
        buckets = bucket_by_length(sents, {}, {}, k=6)
        assert len(buckets) == 6
        assert all(abs(b["sentences"] - 100) <= 1 for b in buckets)
        assert sum(b["sentences"] for b in buckets) == 600

    def test_fewer_sentences_than_buckets_warns(self, caplog):
        import logging
        sents = make_sentences([2, 3])
        with caplog.at_level(logging.WARNING):
            buckets = bucket_by_length(sents, {}, {}, k=6)
        assert len(buckets) == 2
        assert any("buckets" in rec.message for rec in caplog.records)

    def test_bucket_union_equals_overall(self):
        rng = np.random.default_rng(4)
        sents = make_sentences(rng.integers(1, 20, size=60))
        gold, pred = {}, {}
        for s in sents:
            n = len(s)
            gold[s.id] = {EntitySpan(1, min(2, n), "LOC")}
            pred[s.id] = {EntitySpan(1, min(2, n), "LOC")} if rng.random() < 0.6 else set()
        buckets = bucket_by_length(sents, gold, pred, k=6)
        tp = sum(round(b["precision"] * 0 + b["recall"] * b["sentences"]) for b in buckets)
        p, r, f = prf1(gold, pred)
        # micro recall over the union of buckets equals overall recall
        assert abs(tp / len(sents) - r) < 1e-9


def test_evaluation_report_shape():
    scheme = TagScheme("BIOES", ("LOC",))
    sents = make_sentences([2, 3, 4])
    gold = {s.id: {EntitySpan(1, 1, "LOC")} for s in sents}
    report = evaluation_report(sents, gold, gold, k=2)
    assert report["overall"]["f1"] == 1.0
    assert "LOC" in report["per_type"]
    assert len(report["buckets"]) == 2
    import json
    assert json.dumps(report)
