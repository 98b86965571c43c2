"""Corpus-level statistics: compression ratios, cleaning totals, and
length-based curriculum partitioning.

The raw-token baseline is an injected counter (any ``str -> int``); its
identity travels in the report so numbers stay attributable. A simple
digit-splitting counter is provided for a generic subword-style baseline.
Atomic counts are taken after cleaning so the AT->ST ratio isolates merge
compression: a zero-merge vocabulary yields exactly 1.0.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

from .atomic import AtomicVocab, TokenSeq, count_tokens, encode_atomic
from .errors import EmptyCorpus
from .ir import Element, SvgDocument, serialize_svg
from .segments import (
    NoiseReport,
    SegmentVocab,
    clean_segments,
    clean_sequence,
    encode_segments,
    extract_segments,
)

STAGE_BOUNDARIES = (30, 326, 605, 1000)

_BASE_TOKEN = re.compile(r"\d|[A-Za-z]+|[^\sA-Za-z\d]")


def digit_splitting_counter(text: str) -> int:
    """Generic subword-style baseline: letter runs and punctuation chunk as
    single tokens, every digit counts separately."""
    return len(_BASE_TOKEN.findall(text))


@dataclass(frozen=True)
class CompressionReport:
    n_samples: int
    avg_raw_tokens: float
    avg_atomic_tokens: float
    avg_segment_tokens: float
    ratio_raw_to_at: float
    ratio_at_to_st: float
    paths_avg: float
    cmds_avg: float
    baseline_name: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _doc_shape(doc: SvgDocument) -> tuple[int, int]:
    paths = commands = 0
    stack: list[Element] = [doc.root]
    while stack:
        el = stack.pop()
        if el.path_data is not None:
            paths += 1
            commands += len(el.path_data)
        stack.extend(el.children)
    return paths, commands


def compression_report(
    docs: Iterable[SvgDocument],
    vocab: AtomicVocab,
    sv: SegmentVocab,
    baseline_counter: Callable[[str], int],
    baseline_name: str = "",
) -> CompressionReport:
    """Average token counts and stage-to-stage ratios over preprocessed docs."""
    n = 0
    raw_total = at_total = st_total = 0
    paths_total = cmds_total = 0
    for doc in docs:
        n += 1
        raw_total += baseline_counter(serialize_svg(doc))
        seq = encode_atomic(doc, vocab)
        cleaned, _ = clean_sequence(seq, vocab)
        at_total += count_tokens(cleaned)
        st_total += count_tokens(encode_segments(seq, sv))
        paths, commands = _doc_shape(doc)
        paths_total += paths
        cmds_total += commands
    if n == 0:
        raise EmptyCorpus("compression report over an empty corpus")
    return CompressionReport(
        n_samples=n,
        avg_raw_tokens=raw_total / n,
        avg_atomic_tokens=at_total / n,
        avg_segment_tokens=st_total / n,
        ratio_raw_to_at=raw_total / at_total if at_total else 0.0,
        ratio_at_to_st=at_total / st_total if st_total else 0.0,
        paths_avg=paths_total / n,
        cmds_avg=cmds_total / n,
        baseline_name=baseline_name,
    )


def stage_of(n_tokens: int) -> str:
    """Curriculum stage for an atomic token length.

    S1 = [30, 326), S2 = [326, 605), S3 = [605, 1000]; anything outside is
    discarded.
    """
    if STAGE_BOUNDARIES[0] <= n_tokens < STAGE_BOUNDARIES[1]:
        return "S1"
    if STAGE_BOUNDARIES[1] <= n_tokens < STAGE_BOUNDARIES[2]:
        return "S2"
    if STAGE_BOUNDARIES[2] <= n_tokens <= STAGE_BOUNDARIES[3]:
        return "S3"
    return "discard"


@dataclass(frozen=True)
class StageBuckets:
    assignment: tuple[str, ...]
    boundaries: tuple[int, int, int, int] = STAGE_BOUNDARIES

    @property
    def counts(self) -> dict[str, int]:
        out = {"S1": 0, "S2": 0, "S3": 0, "discard": 0}
        for stage in self.assignment:
            out[stage] += 1
        return out

    def as_dict(self) -> dict:
        return {"boundaries": list(self.boundaries), "counts": self.counts}


def partition_by_length(corpus: Iterable[TokenSeq]) -> StageBuckets:
    """Assign each atomic sequence to a curriculum stage by token count."""
    return StageBuckets(tuple(stage_of(count_tokens(seq)) for seq in corpus))


def cleaning_report(corpus: Iterable[TokenSeq], vocab: AtomicVocab) -> NoiseReport:
    """Aggregate per-sample cleaning reports over an atomic-sequence corpus."""
    reports = [
        clean_segments(extract_segments(seq, vocab), vocab)[1] for seq in corpus
    ]
    return NoiseReport.aggregate(reports)
