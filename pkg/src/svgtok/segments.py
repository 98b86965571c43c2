"""Learned segment vocabulary over atomic token sequences.

A segment is one drawing command together with its full parameter run
(arc flags included). Paths are cleaned of geometry-free noise, then a
vocabulary of composite segments is learned by repeatedly merging the most
frequent adjacent segment pair within paths — never across path or element
boundaries — until the best count no longer exceeds ``f_min`` or the merge
budget is spent. Encoding replaces merged runs with composite tokens whose
ids extend the atomic vocabulary (composite ``k`` is id ``len(vocab) + k``,
rendered ``<seg_k>`` in text form); structure tokens and attribute spans pass
through untouched. Every composite expands to a concatenation of whole
segments, so each learned token stays executable path geometry.

Noise motifs recognized by cleaning:

- ``zero_move_command``: relative l/c/s/q/t/h/v whose deltas are all ``<d_0>``
  (removed; a zero-delta ``m`` is kept — it starts a new subpath).
- ``degenerate_arc``: an arc with zero endpoint delta (removed) or a zero
  radius (replaced by the straight line it renders as).
- ``zero_delta_pair``: adjacent ``<d_0><d_0>`` inside kept segments (counted,
  non-overlapping; nothing is removed).

Removals never change the path's absolute endpoint sequence.
"""

from __future__ import annotations

import hashlib
import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

from .atomic import AtomicVocab, Lit, Tok, TokenItem, TokenSeq, build_vocab
from .errors import (
    ArityViolation,
    EmptyCorpus,
    SvgTokError,
    UnbalancedStructure,
    UnknownComposite,
)
from .fileio import atomic_write_text
from .ir import PARAM_COUNT

MOTIFS = ("zero_move_command", "degenerate_arc", "zero_delta_pair")

_ZERO_MOVE_OPS = frozenset({"l", "c", "s", "q", "t", "h", "v"})


def segment_arity(op: str) -> int:
    """Parameter token count for a command, arc flag slots included."""
    return PARAM_COUNT[op.upper()] + (2 if op.upper() == "A" else 0)


@dataclass(frozen=True)
class Segment:
    """One command token id with its parameter token ids, at exact arity."""

    command: int
    params: tuple[int, ...] = ()


def segment_atoms(seg: Segment) -> tuple[int, ...]:
    """The segment's flat atomic token ids: command first, then parameters."""
    return (seg.command,) + seg.params


@dataclass(frozen=True)
class NoiseReport:
    """Cleaning statistics for one or more samples.

    ``removed_counts`` and ``motif_counts`` are raw tallies; the
    ``removed_per_command`` and ``redundancy_mass`` views normalize them to
    per-sample averages and motif fractions.
    """

    removed_counts: dict[str, int] = field(default_factory=dict)
    motif_counts: dict[str, int] = field(default_factory=dict)
    samples: int = 1

    @property
    def removed_per_command(self) -> dict[str, float]:
        n = max(self.samples, 1)
        return {op: count / n for op, count in sorted(self.removed_counts.items())}

    @property
    def redundancy_mass(self) -> dict[str, float]:
        total = sum(self.motif_counts.values())
        return {
            motif: (self.motif_counts.get(motif, 0) / total if total else 0.0)
            for motif in MOTIFS
        }

    @staticmethod
    def aggregate(reports: Iterable["NoiseReport"]) -> "NoiseReport":
        removed: Counter = Counter()
        motifs: Counter = Counter()
        samples = 0
        for report in reports:
            removed.update(report.removed_counts)
            motifs.update(report.motif_counts)
            samples += report.samples
        return NoiseReport(dict(removed), dict(motifs), samples)


@dataclass(frozen=True)
class SegmentVocab:
    """An ordered merge list over a base segment alphabet.

    Base segments carry ids by first encounter in the training corpus;
    merge ``k`` defines composite symbol ``len(segments) + k`` and output
    token id ``len(vocab) + k``.
    """

    vocab: AtomicVocab
    merge_budget: int
    f_min: int
    segments: tuple[Segment, ...]
    merges: tuple[tuple[int, int], ...]
    fingerprint: str = ""

    @property
    def n_base(self) -> int:
        return len(self.segments)

    @property
    def atomic_size(self) -> int:
        return len(self.vocab)

    @cached_property
    def _segment_index(self) -> dict[Segment, int]:
        return {seg: i for i, seg in enumerate(self.segments)}

    @cached_property
    def _expansions(self) -> tuple[tuple[int, ...], ...]:
        out: list[tuple[int, ...]] = []

        def atoms_of(symbol: int) -> tuple[int, ...]:
            if symbol < self.n_base:
                return segment_atoms(self.segments[symbol])
            return out[symbol - self.n_base]

        for left, right in self.merges:
            out.append(atoms_of(left) + atoms_of(right))
        return tuple(out)

    def composite_atoms(self, k: int) -> tuple[int, ...]:
        """Flattened atomic token ids of composite k."""
        if not 0 <= k < len(self.merges):
            raise UnknownComposite(f"no composite {k} in a vocabulary of {len(self.merges)}")
        return self._expansions[k]

    @cached_property
    def composites(self) -> dict[int, tuple[int, ...]]:
        """Output token id -> flattened atomic token ids."""
        return {self.atomic_size + k: exp for k, exp in enumerate(self._expansions)}

    def composite_token(self, k: int) -> str:
        return f"<seg_{k}>"

    @cached_property
    def composite_strings(self) -> dict[int, str]:
        """Output token id -> text-form token, for seq_to_text."""
        return {self.atomic_size + k: f"<seg_{k}>" for k in range(len(self.merges))}

    @cached_property
    def composite_ids(self) -> dict[str, int]:
        """Text-form token -> output token id, for text_to_seq."""
        return {f"<seg_{k}>": self.atomic_size + k for k in range(len(self.merges))}


# ---- sequence chunking ----


def _scan_path(
    items: tuple[TokenItem, ...], pos: int, vocab: AtomicVocab, close_id: int
) -> tuple[list[Segment], int]:
    """Segments from pos up to (not including) the path close token."""
    segs: list[Segment] = []
    while pos < len(items):
        item = items[pos]
        if not isinstance(item, Tok):
            raise UnbalancedStructure(f"literal span inside path geometry at {pos}")
        if item.id == close_id:
            return segs, pos
        if vocab.category(item.id) != "cmd":
            raise UnbalancedStructure(
                f"{vocab.token(item.id)} inside a path where a command was expected"
            )
        op = vocab.command_op(item.id)
        arity = segment_arity(op)
        params = items[pos + 1 : pos + 1 + arity]
        if len(params) < arity or not all(
            isinstance(p, Tok) and vocab.category(p.id) in ("coord_abs", "coord_rel", "flag")
            for p in params
        ):
            raise ArityViolation(f"command {op!r} lacks its {arity} parameter tokens")
        segs.append(Segment(item.id, tuple(p.id for p in params)))
        pos += 1 + arity
    raise UnbalancedStructure("path is never closed")


def _chunks(seq: TokenSeq, vocab: AtomicVocab) -> list[tuple[str, list]]:
    """Split into alternating ("items", [...]) and ("path", [Segment...]) runs.

    Path chunks hold the command stream between a path's opening token (plus
    its optional attribute span) and its closing token; everything else rides
    in items chunks unchanged.
    """
    open_id, close_id = vocab.open_id("path"), vocab.close_id("path")
    out: list[tuple[str, list]] = []
    buf: list[TokenItem] = []
    items = seq.items
    pos = 0
    while pos < len(items):
        item = items[pos]
        if isinstance(item, Tok) and item.id == open_id:
            buf.append(item)
            pos += 1
            if pos < len(items) and isinstance(items[pos], Lit):
                buf.append(items[pos])
                pos += 1
            out.append(("items", buf))
            segs, pos = _scan_path(items, pos, vocab, close_id)
            out.append(("path", segs))
            buf = [items[pos]]
            pos += 1
        else:
            buf.append(item)
            pos += 1
    if buf:
        out.append(("items", buf))
    return out


def extract_segments(seq: TokenSeq, vocab: AtomicVocab) -> list[list[Segment]]:
    """Per-path segment lists; paths stay independent (no cross-path adjacency)."""
    return [payload for kind, payload in _chunks(seq, vocab) if kind == "path"]


# ---- cleaning ----


def _clean_path(
    segs: list[Segment], vocab: AtomicVocab, removed: Counter, motifs: Counter
) -> list[Segment]:
    d0 = vocab.rel_id(0)
    kept: list[Segment] = []
    for seg in segs:
        op = vocab.command_op(seg.command)
        if op in _ZERO_MOVE_OPS and seg.params and all(p == d0 for p in seg.params):
            removed[op] += 1
            motifs["zero_move_command"] += 1
            continue
        if op == "a":
            rx, ry, _rot, _large, _sweep, dx, dy = seg.params
            if dx == d0 and dy == d0:
                removed[op] += 1
                motifs["degenerate_arc"] += 1
                continue
            if rx == d0 or ry == d0:
                removed[op] += 1
                motifs["degenerate_arc"] += 1
                kept.append(Segment(vocab.cmd_id("l"), (dx, dy)))
                continue
        kept.append(seg)
    for seg in kept:
        run = segment_atoms(seg)
        i = 0
        while i < len(run) - 1:
            if run[i] == d0 and run[i + 1] == d0:
                motifs["zero_delta_pair"] += 1
                i += 2
            else:
                i += 1
    return kept


def clean_segments(
    paths: list[list[Segment]], vocab: AtomicVocab
) -> tuple[list[list[Segment]], NoiseReport]:
    """Drop geometry-free segments from one sample's paths and report them."""
    removed: Counter = Counter()
    motifs: Counter = Counter()
    cleaned = [_clean_path(segs, vocab, removed, motifs) for segs in paths]
    return cleaned, NoiseReport(dict(removed), dict(motifs), samples=1)


def clean_sequence(seq: TokenSeq, vocab: AtomicVocab) -> tuple[TokenSeq, NoiseReport]:
    """The sequence with its paths cleaned in place, plus the noise report."""
    removed: Counter = Counter()
    motifs: Counter = Counter()
    out: list[TokenItem] = []
    for kind, payload in _chunks(seq, vocab):
        if kind == "items":
            out.extend(payload)
        else:
            for seg in _clean_path(payload, vocab, removed, motifs):
                out.extend(Tok(a) for a in segment_atoms(seg))
    report = NoiseReport(dict(removed), dict(motifs), samples=1)
    return TokenSeq(tuple(out)), report


# ---- training ----


def _fingerprint_update(digest, seq: TokenSeq) -> None:
    for item in seq.items:
        if isinstance(item, Lit):
            digest.update(b"L")
            digest.update(item.text.encode("utf-8"))
            digest.update(b"\x00")
        else:
            digest.update(item.id.to_bytes(4, "little"))
    digest.update(b"\xff\xff\xff\xff")


def _merge_pass(syms: list, left, right, new: int) -> tuple[list, bool]:
    out: list = []
    i = 0
    merged = False
    while i < len(syms):
        if i + 1 < len(syms) and syms[i] == left and syms[i + 1] == right:
            out.append(new)
            i += 2
            merged = True
        else:
            out.append(syms[i])
            i += 1
    return out, merged


def _learn_merges(
    paths: list[list[int]], n_base: int, m_merges: int, f_min: int
) -> tuple[tuple[int, int], ...]:
    """Argmax pair merging with exact incremental count maintenance.

    Counts and the pair -> path occurrence index are updated by recounting
    only the paths touched by each merge, which keeps every iteration equal
    to a from-scratch recount of all adjacent pairs.
    """
    counts: Counter = Counter()
    occurs: dict[tuple[int, int], set[int]] = {}
    for idx, row in enumerate(paths):
        for pair in zip(row, row[1:]):
            counts[pair] += 1
            occurs.setdefault(pair, set()).add(idx)

    merges: list[tuple[int, int]] = []
    for k in range(m_merges):
        if not counts:
            break
        best, best_count = min(
            counts.items(), key=lambda item: (-item[1], item[0])
        )
        if best_count <= f_min:
            break
        merges.append(best)
        new = n_base + k
        for idx in sorted(occurs.get(best, ())):
            row = paths[idx]
            old_pairs = Counter(zip(row, row[1:]))
            new_row, _ = _merge_pass(row, best[0], best[1], new)
            new_pairs = Counter(zip(new_row, new_row[1:]))
            paths[idx] = new_row
            for pair in old_pairs.keys() | new_pairs.keys():
                delta = new_pairs.get(pair, 0) - old_pairs.get(pair, 0)
                if delta:
                    remaining = counts.get(pair, 0) + delta
                    if remaining:
                        counts[pair] = remaining
                    else:
                        del counts[pair]
                if new_pairs.get(pair, 0):
                    occurs.setdefault(pair, set()).add(idx)
                elif pair in occurs:
                    occurs[pair].discard(idx)
    return tuple(merges)


def train(
    corpus: Iterable[TokenSeq],
    m_merges: int = 500,
    f_min: int = 2,
    vocab: AtomicVocab | None = None,
) -> SegmentVocab:
    """Learn a segment vocabulary from an atomic-sequence corpus.

    Sequences are cleaned before counting. Deterministic given corpus order:
    base segment ids follow first encounter, and count ties break to the
    lowest (left id, right id) pair.
    """
    if m_merges < 0:
        raise ValueError(f"merge budget must be >= 0, got {m_merges}")
    if f_min < 1:
        raise ValueError(f"minimum frequency must be >= 1, got {f_min}")
    vocab = vocab if vocab is not None else build_vocab()
    digest = hashlib.blake2b(digest_size=16)
    seg_ids: dict[Segment, int] = {}
    paths: list[list[int]] = []
    n_seqs = 0
    for seq in corpus:
        n_seqs += 1
        _fingerprint_update(digest, seq)
        cleaned, _ = clean_segments(extract_segments(seq, vocab), vocab)
        for segs in cleaned:
            paths.append([seg_ids.setdefault(seg, len(seg_ids)) for seg in segs])
    if n_seqs == 0:
        raise EmptyCorpus("training corpus yielded no sequences")
    merges = _learn_merges(paths, len(seg_ids), m_merges, f_min)
    segments = tuple(sorted(seg_ids, key=seg_ids.get))
    return SegmentVocab(vocab, m_merges, f_min, segments, merges, digest.hexdigest())


# ---- encode / expand ----


def _apply_merges(syms: list, sv: SegmentVocab) -> list:
    present = {s for s in syms if isinstance(s, int)}
    for k, (left, right) in enumerate(sv.merges):
        if left not in present or right not in present:
            continue
        syms, merged = _merge_pass(syms, left, right, sv.n_base + k)
        if merged:
            present = {s for s in syms if isinstance(s, int)}
    return syms


def encode_segments(seq: TokenSeq, sv: SegmentVocab) -> TokenSeq:
    """Clean, then apply merges in learned order within each path.

    Segments outside the vocabulary's alphabet pass through as atomic
    tokens; merged runs become composite token ids above the atomic range.
    """
    vocab = sv.vocab
    removed: Counter = Counter()
    motifs: Counter = Counter()
    out: list[TokenItem] = []
    for kind, payload in _chunks(seq, vocab):
        if kind == "items":
            out.extend(payload)
            continue
        cleaned = _clean_path(payload, vocab, removed, motifs)
        syms = [sv._segment_index.get(seg, seg) for seg in cleaned]
        for sym in _apply_merges(syms, sv):
            if isinstance(sym, Segment):
                out.extend(Tok(a) for a in segment_atoms(sym))
            elif sym < sv.n_base:
                out.extend(Tok(a) for a in segment_atoms(sv.segments[sym]))
            else:
                out.append(Tok(sv.atomic_size + (sym - sv.n_base)))
    return TokenSeq(tuple(out))


def expand_segments(seq: TokenSeq, sv: SegmentVocab) -> TokenSeq:
    """Replace composite tokens by their atomic expansions; exact inverse of
    encode_segments on cleaned input."""
    out: list[TokenItem] = []
    for item in seq.items:
        if isinstance(item, Tok) and item.id >= sv.atomic_size:
            k = item.id - sv.atomic_size
            if k >= len(sv.merges):
                raise UnknownComposite(
                    f"composite id {item.id} not in a vocabulary of {len(sv.merges)} merges"
                )
            out.extend(Tok(a) for a in sv.composite_atoms(k))
        else:
            out.append(item)
    return TokenSeq(tuple(out))


# ---- stats ----


def _quartiles(sorted_values: list[int]) -> dict[str, float] | None:
    if not sorted_values:
        return None
    if len(sorted_values) == 1:
        v = float(sorted_values[0])
        return {"min": v, "q1": v, "median": v, "q3": v, "max": v}
    q1, med, q3 = statistics.quantiles(sorted_values, n=4, method="inclusive")
    return {
        "min": float(sorted_values[0]),
        "q1": q1,
        "median": med,
        "q3": q3,
        "max": float(sorted_values[-1]),
    }


def segment_stats(sv: SegmentVocab, corpus: Iterable[TokenSeq]) -> dict:
    """Usage-ranked composite report: command shares and atomic lengths per
    frequency bucket (Top 50 / 51-200 / rest)."""
    usage: Counter = Counter()
    for seq in corpus:
        for item in encode_segments(seq, sv).items:
            if isinstance(item, Tok) and item.id >= sv.atomic_size:
                usage[item.id - sv.atomic_size] += 1
    order = sorted(range(len(sv.merges)), key=lambda k: (-usage.get(k, 0), k))
    buckets = {"top50": order[:50], "51-200": order[50:200], "rest": order[200:]}
    report: dict = {"total_composites": len(sv.merges), "buckets": {}}
    for name, ks in buckets.items():
        lengths = sorted(len(sv.composite_atoms(k)) for k in ks)
        ops: Counter = Counter()
        for k in ks:
            for atom in sv.composite_atoms(k):
                if sv.vocab.category(atom) == "cmd":
                    ops[sv.vocab.command_op(atom)] += 1
        total_ops = sum(ops.values())
        report["buckets"][name] = {
            "composites": len(ks),
            "usage": sum(usage.get(k, 0) for k in ks),
            "command_shares": {
                op: count / total_ops for op, count in sorted(ops.items())
            },
            "length": _quartiles(lengths),
        }
    return report


# ---- vocabulary file ----

_FORMAT = "svgtok-segments"
_VERSION = 1


def vocab_to_json(sv: SegmentVocab) -> str:
    vocab = sv.vocab
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "params": {
            "merges": sv.merge_budget,
            "min_freq": sv.f_min,
            "canvas": vocab.canvas,
            "tolerance": vocab.tolerance,
        },
        "structure_tags": list(vocab.structure_tags),
        "corpus_fingerprint": sv.fingerprint,
        "segments": [
            [vocab.token(a) for a in segment_atoms(seg)] for seg in sv.segments
        ],
        "merges": [list(pair) for pair in sv.merges],
        "composites": [
            [vocab.token(a) for a in sv.composite_atoms(k)]
            for k in range(len(sv.merges))
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def vocab_from_json(text: str) -> SegmentVocab:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"segment vocabulary is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != _FORMAT:
        raise ValueError("not a segment vocabulary file")
    if payload.get("version") != _VERSION:
        raise ValueError(f"unsupported vocabulary version {payload.get('version')!r}")
    params = payload["params"]
    vocab = build_vocab(
        canvas=params["canvas"],
        tolerance=params["tolerance"],
        structure_tags=tuple(payload["structure_tags"]),
    )

    def parse_segment(tokens: list[str]) -> Segment:
        try:
            ids = [vocab.id_of(t) for t in tokens]
        except SvgTokError as exc:
            raise ValueError(f"bad segment entry {tokens!r}: {exc}") from None
        if not ids or vocab.category(ids[0]) != "cmd":
            raise ValueError(f"segment entry {tokens!r} does not start with a command")
        op = vocab.command_op(ids[0])
        if len(ids) - 1 != segment_arity(op):
            raise ValueError(
                f"segment entry {tokens!r} has arity {len(ids) - 1},"
                f" expected {segment_arity(op)} for {op!r}"
            )
        return Segment(ids[0], tuple(ids[1:]))

    segments = tuple(parse_segment(entry) for entry in payload["segments"])
    merges: list[tuple[int, int]] = []
    for i, pair in enumerate(payload["merges"]):
        if len(pair) != 2 or not all(isinstance(v, int) for v in pair):
            raise ValueError(f"bad merge entry {pair!r}")
        left, right = pair
        limit = len(segments) + i
        if not (0 <= left < limit and 0 <= right < limit):
            raise ValueError(f"merge {i} references symbol outside [0, {limit})")
        merges.append((left, right))
    sv = SegmentVocab(
        vocab,
        params["merges"],
        params["min_freq"],
        segments,
        tuple(merges),
        payload.get("corpus_fingerprint", ""),
    )
    recomputed = [
        [vocab.token(a) for a in sv.composite_atoms(k)] for k in range(len(merges))
    ]
    if recomputed != payload["composites"]:
        raise ValueError("composite expansions do not match the merge list")
    return sv


def save_vocab(sv: SegmentVocab, path: str | Path) -> None:
    atomic_write_text(path, vocab_to_json(sv))


def load_vocab(path: str | Path) -> SegmentVocab:
    return vocab_from_json(Path(path).read_text(encoding="utf-8"))
