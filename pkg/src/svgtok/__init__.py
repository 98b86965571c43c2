"""Hierarchical SVG tokenization: canonical preprocessing, an atomic token
vocabulary over structure/commands/coordinates, learned segment merges, and
structured embedding initializations for the resulting tokens.
"""

__version__ = "0.1.0"

from .atomic import (
    AtomicVocab,
    Lit,
    Tok,
    TokenSeq,
    build_vocab,
    count_tokens,
    decode_atomic,
    encode_atomic,
    id_lines_to_seq,
    seq_to_id_lines,
    seq_to_text,
    text_to_seq,
)
from .embed_init import (
    BaseEmbeddingTable,
    HmnParams,
    TokenMeta,
    build_token_metas,
    init_token,
    init_vocab,
    numeric_direction,
    semantic_embedding,
)
from .errors import SvgTokError
from .ir import PathCommand, SvgDocument, ViewBox, parse_svg, serialize_svg
from .metrics import (
    CompressionReport,
    StageBuckets,
    cleaning_report,
    compression_report,
    digit_splitting_counter,
    partition_by_length,
    stage_of,
)
from .preprocess import PreprocessConfig, preprocess
from .segments import (
    NoiseReport,
    Segment,
    SegmentVocab,
    clean_sequence,
    encode_segments,
    expand_segments,
    load_vocab,
    save_vocab,
    segment_stats,
    train,
)

__all__ = [
    "__version__",
    "AtomicVocab",
    "BaseEmbeddingTable",
    "CompressionReport",
    "HmnParams",
    "Lit",
    "NoiseReport",
    "PathCommand",
    "PreprocessConfig",
    "Segment",
    "SegmentVocab",
    "StageBuckets",
    "SvgDocument",
    "SvgTokError",
    "Tok",
    "TokenMeta",
    "TokenSeq",
    "ViewBox",
    "build_token_metas",
    "build_vocab",
    "clean_sequence",
    "cleaning_report",
    "compression_report",
    "count_tokens",
    "decode_atomic",
    "digit_splitting_counter",
    "encode_atomic",
    "encode_segments",
    "expand_segments",
    "id_lines_to_seq",
    "init_token",
    "init_vocab",
    "load_vocab",
    "numeric_direction",
    "parse_svg",
    "partition_by_length",
    "preprocess",
    "save_vocab",
    "segment_stats",
    "semantic_embedding",
    "seq_to_id_lines",
    "seq_to_text",
    "serialize_svg",
    "stage_of",
    "text_to_seq",
    "train",
]
