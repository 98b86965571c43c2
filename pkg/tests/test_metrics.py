"""Corpus statistics: compression ratios, curriculum buckets, cleaning totals.

Expected numbers are hand-derived. Token counts for the fixture documents are
frozen from manual tallies of their atomic streams; every ratio is plain
arithmetic over those tallies, recomputed here rather than echoed from the
implementation.
"""

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from svgtok.atomic import Tok, TokenSeq, build_vocab, count_tokens, encode_atomic
from svgtok.errors import EmptyCorpus
from svgtok.metrics import (
    STAGE_BOUNDARIES,
    StageBuckets,
    cleaning_report,
    compression_report,
    digit_splitting_counter,
    partition_by_length,
    stage_of,
)
from svgtok.preprocess import preprocess
from svgtok.segments import train

V = build_vocab()


def make_doc(*ds: str):
    paths = "".join(f'<path d="{d}"/>' for d in ds)
    return preprocess(f'<svg viewBox="0 0 784 784">{paths}</svg>')


# Atomic stream of DOC_PLAIN, tallied by hand:
#   <svg> viewBox-lit <path> fill-lit M P P l d d z </path> </svg>  -> 13 items
DOC_PLAIN = make_doc("M 100 200 l 50 -30 z")
# One zero-move lineto (3 tokens) on top of DOC_PLAIN's shape: 16 raw, 13 clean.
DOC_ZMOVE = make_doc("M 10 10 l 0 0 l 5 5 z")
DOC_HV = make_doc("M 10 10 h 0 l 0 0 l 3 3 z")
DOC_ARC = make_doc("M 10 10 a 0 5 0 0 1 10 10 z")

ZERO_VOCAB = train([encode_atomic(DOC_PLAIN, V)], m_merges=0, f_min=2, vocab=V)


def atomic(doc) -> TokenSeq:
    return encode_atomic(doc, V)


# ---- baseline counter ----


def test_digit_splitting_counter_frozen_values():
    assert digit_splitting_counter("M 100 200 l 50 -30 z") == 14
    assert digit_splitting_counter("fill=#ff0000") == 8
    assert digit_splitting_counter("viewBox=0 0 784 784") == 10
    assert digit_splitting_counter("<path/>") == 4
    assert digit_splitting_counter("") == 0
    assert digit_splitting_counter("   \n\t ") == 0


def test_digit_splitting_counter_splits_every_digit():
    assert digit_splitting_counter("1234567890") == 10
    assert digit_splitting_counter("abcdefghij") == 1


# ---- compression report ----


def test_compression_report_frozen_arithmetic():
    report = compression_report(
        [DOC_PLAIN, DOC_ZMOVE],
        V,
        ZERO_VOCAB,
        baseline_counter=lambda s: 100,
        baseline_name="const100",
    )
    assert report.n_samples == 2
    assert report.avg_raw_tokens == 100.0
    # Cleaned atomic counts: 13 and 13 (the zero-move lineto is dropped).
    assert report.avg_atomic_tokens == 13.0
    assert report.avg_segment_tokens == 13.0
    assert report.ratio_raw_to_at == pytest.approx(200 / 26, rel=1e-12)
    assert report.ratio_at_to_st == 1.0
    assert report.paths_avg == 1.0
    # Command counts per document: M,l,z = 3 and M,l,l,z = 4.
    assert report.cmds_avg == 3.5
    assert report.baseline_name == "const100"


def test_zero_merge_vocab_gives_exact_unit_ratio():
    # Even on a noisy corpus: cleaning applies before both counts, so a
    # merge-free vocabulary changes nothing between the two stages.
    report = compression_report(
        [DOC_ZMOVE, DOC_HV, DOC_ARC], V, ZERO_VOCAB, baseline_counter=len
    )
    assert report.ratio_at_to_st == 1.0
    assert report.avg_atomic_tokens == report.avg_segment_tokens


def test_merges_shrink_segment_stage():
    doc = make_doc("M 10 10 l 5 5 l 7 7 l 5 5 l 7 7 z")
    corpus = [atomic(doc)] * 3
    sv = train(corpus, m_merges=2, f_min=2, vocab=V)
    assert len(sv.merges) == 2
    report = compression_report([doc] * 3, V, sv, baseline_counter=len)
    assert report.avg_segment_tokens < report.avg_atomic_tokens
    assert report.ratio_at_to_st > 1.0
    assert math.isclose(
        report.ratio_at_to_st,
        report.avg_atomic_tokens / report.avg_segment_tokens,
        rel_tol=1e-12,
    )


def test_compression_report_accepts_generator():
    report = compression_report(
        (d for d in [DOC_PLAIN]), V, ZERO_VOCAB, baseline_counter=len
    )
    assert report.n_samples == 1


def test_compression_report_empty_corpus():
    with pytest.raises(EmptyCorpus):
        compression_report([], V, ZERO_VOCAB, baseline_counter=len)
    with pytest.raises(EmptyCorpus):
        compression_report(iter(()), V, ZERO_VOCAB, baseline_counter=len)


def test_compression_report_json_is_deterministic():
    def run():
        report = compression_report(
            [DOC_PLAIN, DOC_ZMOVE], V, ZERO_VOCAB, digit_splitting_counter, "digits"
        )
        return json.dumps(report.as_dict(), sort_keys=True)

    assert run() == run()


def test_baseline_counter_is_applied_to_serialized_text():
    # A counter pinned to the canonical serialization: raw averages must
    # scale with it, one unit per character.
    a = compression_report([DOC_PLAIN], V, ZERO_VOCAB, baseline_counter=len)
    b = compression_report(
        [DOC_PLAIN], V, ZERO_VOCAB, baseline_counter=lambda s: 2 * len(s)
    )
    assert b.avg_raw_tokens == 2 * a.avg_raw_tokens
    assert b.ratio_raw_to_at == pytest.approx(2 * a.ratio_raw_to_at, rel=1e-12)


# ---- curriculum stages ----


def test_stage_boundaries_frozen():
    assert STAGE_BOUNDARIES == (30, 326, 605, 1000)
    assert StageBuckets(()).boundaries == (30, 326, 605, 1000)


@pytest.mark.parametrize(
    "n,stage",
    [
        (0, "discard"),
        (29, "discard"),
        (30, "S1"),
        (325, "S1"),
        (326, "S2"),
        (604, "S2"),
        (605, "S3"),
        (1000, "S3"),
        (1001, "discard"),
        (5000, "discard"),
    ],
)
def test_stage_of_boundaries(n, stage):
    assert stage_of(n) == stage


@given(st.integers(min_value=0, max_value=5000))
def test_stage_of_matches_piecewise_oracle(n):
    if 30 <= n < 326:
        expected = "S1"
    elif 326 <= n < 605:
        expected = "S2"
    elif 605 <= n <= 1000:
        expected = "S3"
    else:
        expected = "discard"
    assert stage_of(n) == expected


def test_partition_by_length():
    lengths = [29, 30, 325, 326, 604, 605, 1000, 1001]
    corpus = [TokenSeq((Tok(0),) * n) for n in lengths]
    buckets = partition_by_length(corpus)
    assert buckets.assignment == (
        "discard",
        "S1",
        "S1",
        "S2",
        "S2",
        "S3",
        "S3",
        "discard",
    )
    assert buckets.counts == {"S1": 2, "S2": 2, "S3": 2, "discard": 2}
    assert buckets.as_dict() == {
        "boundaries": [30, 326, 605, 1000],
        "counts": {"S1": 2, "S2": 2, "S3": 2, "discard": 2},
    }


def test_partition_empty_corpus_counts_zero():
    buckets = partition_by_length([])
    assert buckets.assignment == ()
    assert buckets.counts == {"S1": 0, "S2": 0, "S3": 0, "discard": 0}


def test_partition_counts_literals_as_single_items():
    # DOC_PLAIN's stream is 13 items (two of them literal spans): well under
    # the S1 floor, so it lands in discard.
    assert count_tokens(atomic(DOC_PLAIN)) == 13
    assert partition_by_length([atomic(DOC_PLAIN)]).assignment == ("discard",)


# ---- cleaning report ----


def test_cleaning_report_frozen_aggregate():
    report = cleaning_report([atomic(DOC_ZMOVE), atomic(DOC_HV)], V)
    assert report.samples == 2
    assert report.removed_counts == {"l": 2, "h": 1}
    assert report.removed_per_command == {"h": 0.5, "l": 1.0}
    assert report.motif_counts == {"zero_move_command": 3}
    assert report.redundancy_mass == {
        "zero_move_command": 1.0,
        "degenerate_arc": 0.0,
        "zero_delta_pair": 0.0,
    }


def test_cleaning_report_mixed_motifs():
    report = cleaning_report([atomic(DOC_ZMOVE), atomic(DOC_ARC)], V)
    assert report.removed_counts == {"l": 1, "a": 1}
    assert report.redundancy_mass == {
        "zero_move_command": 0.5,
        "degenerate_arc": 0.5,
        "zero_delta_pair": 0.0,
    }


def test_cleaning_report_clean_corpus_is_all_zero():
    report = cleaning_report([atomic(DOC_PLAIN)], V)
    assert report.samples == 1
    assert report.removed_counts == {}
    assert report.motif_counts == {}
    assert report.removed_per_command == {}
    assert set(report.redundancy_mass.values()) == {0.0}


def test_cleaning_report_empty_corpus():
    report = cleaning_report([], V)
    assert report.samples == 0
    assert report.removed_counts == {}


def test_cleaning_report_is_deterministic():
    corpus = [atomic(DOC_ZMOVE), atomic(DOC_HV), atomic(DOC_ARC)]
    a = cleaning_report(corpus, V)
    b = cleaning_report(corpus, V)
    assert a == b
