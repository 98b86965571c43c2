"""Structured embedding initialization for new tokens.

Each new token's vector is a weighted mean-noise sum

    e_t = lambda_mu * mu + lambda_n * eps + w_sem * phi(desc_t) + w_num * d_t

where mu is the base vocabulary's mean embedding, eps a per-token Gaussian
noise draw, phi the mean of base rows referenced by the token's description,
and d_t a unit "numeric direction" built from the token's normalized scalar
value (coordinate tokens only; other tokens omit this branch). The numeric
direction embeds v in [0,1] through K Gaussian radial basis functions with
uniform centers (width 1/(K-1)) plus low-order polynomial features
[v, v^2, ...], then applies a fixed random projection to the embedding
dimension and normalizes to unit length.

All randomness comes from counter-based Philox streams keyed by
blake2b(context, seed, token string), so outputs are byte-identical across
runs and independent of evaluation order. The noise scale is carried
entirely by lambda_n (eps is drawn from the standard normal); a reading
where the paper's noise sigma is a separate knob would fold it into
lambda_n here.

Matrix files are binary with a one-line ASCII header
(``svgtok-embed 1 <rows> <dim>``) followed by row-major little-endian
float32 data, or a JSON alternative carrying the same matrix.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .atomic import AtomicVocab
from .errors import DomainError, EmptyDescription, IdOutOfRange
from .fileio import atomic_write_bytes, atomic_write_text
from .segments import SegmentVocab

_MAGIC = "svgtok-embed"
_VERSION = 1


@dataclass(frozen=True)
class HmnParams:
    """Weights and basis sizes for the mean-noise initialization."""

    lambda_mu: float = 0.8
    lambda_n: float = 0.02
    w_sem: float = 0.1
    w_num: float = 0.08
    k_rbf: int = 16
    poly_degree: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("lambda_mu", "lambda_n", "w_sem", "w_num"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.k_rbf < 1:
            raise ValueError(f"k_rbf must be >= 1, got {self.k_rbf}")
        if self.poly_degree < 0:
            raise ValueError(f"poly_degree must be >= 0, got {self.poly_degree}")


@dataclass(frozen=True, eq=False)
class BaseEmbeddingTable:
    """The pretrained vocabulary's embedding matrix (rows are tokens)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise ValueError(f"base table must be a non-empty 2-D matrix, got shape {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def n0(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def mean(self) -> np.ndarray:
        return self.matrix.mean(axis=0)


@dataclass(frozen=True)
class TokenMeta:
    """What initialization knows about one token.

    ``numeric_value`` is the normalized scalar for coordinate tokens (absent
    otherwise). Description ids default to the UTF-8 bytes of the description
    text, so any base vocabulary covering the byte range resolves them; a
    description manifest can override them per token.
    """

    token: str
    description: str
    numeric_value: float | None = None
    description_ids: tuple[int, ...] | None = None

    def resolved_ids(self) -> tuple[int, ...]:
        if self.description_ids is not None:
            return self.description_ids
        return tuple(self.description.encode("utf-8"))


# ---- keyed randomness ----


def _generator(*context: str | int) -> np.random.Generator:
    digest = hashlib.blake2b(digest_size=16)
    for part in context:
        if isinstance(part, int):
            digest.update(part.to_bytes(8, "little", signed=True))
        else:
            digest.update(part.encode("utf-8"))
        digest.update(b"\x1f")
    key = int.from_bytes(digest.digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))


def noise_vector(token: str, params: HmnParams, dim: int) -> np.ndarray:
    """The token's standard-normal draw; keyed by token string, not position."""
    return _generator("svgtok.hmn.noise", params.seed, token).standard_normal(dim)


@lru_cache(maxsize=64)
def projection_matrix(seed: int, k_rbf: int, poly_degree: int, dim: int) -> np.ndarray:
    """Fixed (K+degree) x dim projection with entries N(0, 1/(K+degree))."""
    features = k_rbf + poly_degree
    gen = _generator("svgtok.hmn.projection", seed, k_rbf, poly_degree, dim)
    matrix = gen.standard_normal((features, dim)) / math.sqrt(features)
    matrix.flags.writeable = False
    return matrix


# ---- numeric branch ----


def rbf_poly_features(v: float, params: HmnParams) -> np.ndarray:
    """K Gaussian RBF activations over uniform [0,1] centers plus [v..v^deg]."""
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"numeric value {v!r} outside [0, 1]")
    k = params.k_rbf
    centers = np.linspace(0.0, 1.0, k)
    sigma = 1.0 / (k - 1) if k > 1 else 1.0
    rbf = np.exp(-((v - centers) ** 2) / (2.0 * sigma * sigma))
    poly = np.array([v**p for p in range(1, params.poly_degree + 1)])
    return np.concatenate([rbf, poly])


def numeric_direction(v: float, params: HmnParams, dim: int) -> np.ndarray:
    """Unit vector encoding the scalar v; nearby values stay more aligned."""
    features = rbf_poly_features(v, params)
    projected = features @ projection_matrix(
        params.seed, params.k_rbf, params.poly_degree, dim
    )
    norm = np.linalg.norm(projected)
    if norm == 0.0:
        raise DomainError("numeric direction collapsed to the zero vector")
    return projected / norm


# ---- semantic branch ----


def semantic_embedding(
    description_ids: Sequence[int], base: BaseEmbeddingTable
) -> np.ndarray:
    """Mean of the referenced base rows."""
    ids = list(description_ids)
    if not ids:
        raise EmptyDescription("description resolves to no base ids")
    for i in ids:
        if not 0 <= i < base.n0:
            raise IdOutOfRange(f"description id {i} outside base vocabulary of {base.n0}")
    return base.matrix[np.asarray(ids, dtype=np.intp)].mean(axis=0)


# ---- initialization ----


def init_token(meta: TokenMeta, base: BaseEmbeddingTable, params: HmnParams) -> np.ndarray:
    vector = params.lambda_mu * base.mean + params.lambda_n * noise_vector(
        meta.token, params, base.dim
    )
    if params.w_sem:
        vector = vector + params.w_sem * semantic_embedding(meta.resolved_ids(), base)
    if params.w_num and meta.numeric_value is not None:
        vector = vector + params.w_num * numeric_direction(
            meta.numeric_value, params, base.dim
        )
    return vector


def init_vocab(
    metas: Sequence[TokenMeta], base: BaseEmbeddingTable, params: HmnParams
) -> np.ndarray:
    """Row i initializes metas[i]; deterministic regardless of row order."""
    out = np.empty((len(metas), base.dim), dtype=np.float64)
    for i, meta in enumerate(metas):
        out[i] = init_token(meta, base, params)
    return out


# ---- default glosses ----

_CMD_GLOSS = {
    "M": "absolute move to",
    "m": "relative move to",
    "L": "absolute line to",
    "l": "relative line to",
    "H": "absolute horizontal line",
    "h": "relative horizontal line",
    "V": "absolute vertical line",
    "v": "relative vertical line",
    "C": "absolute cubic curve",
    "c": "relative cubic curve",
    "S": "absolute smooth cubic curve",
    "s": "relative smooth cubic curve",
    "Q": "absolute quadratic curve",
    "q": "relative quadratic curve",
    "T": "absolute smooth quadratic curve",
    "t": "relative smooth quadratic curve",
    "A": "absolute elliptical arc",
    "a": "relative elliptical arc",
    "Z": "close subpath",
    "z": "close subpath",
}


def default_gloss(vocab: AtomicVocab, token_id: int) -> str:
    category = vocab.category(token_id)
    token = vocab.token(token_id)
    if category == "struct":
        if token.startswith("</"):
            return f"end of {token[2:-1]} element"
        return f"start of {token[1:-1]} element"
    if category == "cmd":
        return _CMD_GLOSS[vocab.command_op(token_id)]
    if category == "flag":
        kind, value = vocab.flag_value(token_id)
        return f"arc {kind} flag {value}"
    value = vocab.coord_value(token_id)
    if category == "coord_abs":
        return f"absolute coordinate {value}"
    return f"relative offset {value}"


def token_numeric_value(vocab: AtomicVocab, token_id: int) -> float | None:
    """Normalized scalar in [0,1] for coordinate tokens, None otherwise."""
    category = vocab.category(token_id)
    reach = vocab.canvas + vocab.tolerance
    if category == "coord_abs":
        return vocab.coord_value(token_id) / reach
    if category == "coord_rel":
        return (vocab.coord_value(token_id) + reach) / (2 * reach)
    return None


def build_token_metas(
    vocab: AtomicVocab,
    sv: SegmentVocab | None = None,
    description_ids: dict[str, tuple[int, ...]] | None = None,
) -> list[TokenMeta]:
    """Metadata for every atomic token, plus any composite segment tokens.

    Composites carry the concatenated command glosses of their expansion and
    no numeric value.
    """
    overrides = description_ids or {}
    metas: list[TokenMeta] = []
    for token_id in range(len(vocab)):
        token = vocab.token(token_id)
        metas.append(
            TokenMeta(
                token,
                default_gloss(vocab, token_id),
                token_numeric_value(vocab, token_id),
                overrides.get(token),
            )
        )
    if sv is not None:
        for k in range(len(sv.merges)):
            glosses = [
                _CMD_GLOSS[sv.vocab.command_op(atom)]
                for atom in sv.composite_atoms(k)
                if sv.vocab.category(atom) == "cmd"
            ]
            token = sv.composite_token(k)
            metas.append(
                TokenMeta(token, "; ".join(glosses), None, overrides.get(token))
            )
    return metas


# ---- files ----


def save_matrix(matrix: np.ndarray, path: str | Path, fmt: str = "binary") -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
    if fmt == "binary":
        data = np.ascontiguousarray(matrix, dtype="<f4")
        header = f"{_MAGIC} {_VERSION} {matrix.shape[0]} {matrix.shape[1]}\n"
        atomic_write_bytes(path, header.encode("ascii") + data.tobytes())
    elif fmt == "json":
        payload = {
            "format": _MAGIC,
            "version": _VERSION,
            "matrix": [[float(v) for v in row] for row in matrix],
        }
        atomic_write_text(path, json.dumps(payload) + "\n")
    else:
        raise ValueError(f"format must be binary or json, got {fmt!r}")


def load_matrix(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:1] == b"{":
        try:
            payload = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ValueError(f"matrix file is not valid JSON: {exc}") from None
        if payload.get("format") != _MAGIC:
            raise ValueError("not an embedding matrix file")
        matrix = np.asarray(payload["matrix"], dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("JSON matrix is not 2-D")
        return matrix
    head, _, body = data.partition(b"\n")
    fields = head.decode("ascii", errors="replace").split()
    if len(fields) != 4 or fields[0] != _MAGIC:
        raise ValueError("not an embedding matrix file")
    if fields[1] != str(_VERSION):
        raise ValueError(f"unsupported matrix file version {fields[1]!r}")
    rows, dim = int(fields[2]), int(fields[3])
    expected = rows * dim * 4
    if len(body) != expected:
        raise ValueError(f"matrix body holds {len(body)} bytes, expected {expected}")
    return (
        np.frombuffer(body, dtype="<f4").reshape(rows, dim).astype(np.float64)
    )


def save_base_table(table: BaseEmbeddingTable, path: str | Path, fmt: str = "binary") -> None:
    save_matrix(table.matrix, path, fmt=fmt)


def load_base_table(path: str | Path) -> BaseEmbeddingTable:
    return BaseEmbeddingTable(load_matrix(path))


def save_manifest(path: str | Path, params: HmnParams, tokens: Iterable[str]) -> None:
    payload = {
        "format": "svgtok-embed-manifest",
        "version": _VERSION,
        "seed": params.seed,
        "params": {
            "lambda_mu": params.lambda_mu,
            "lambda_n": params.lambda_n,
            "w_sem": params.w_sem,
            "w_num": params.w_num,
            "k_rbf": params.k_rbf,
            "poly_degree": params.poly_degree,
        },
        "tokens": list(tokens),
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_description_ids(path: str | Path) -> dict[str, tuple[int, ...]]:
    """A description manifest: token string -> base-vocab id list."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise ValueError("description manifest must be a JSON object")
    out: dict[str, tuple[int, ...]] = {}
    for token, ids in payload.items():
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise ValueError(f"bad description ids for {token!r}")
        out[token] = tuple(ids)
    return out
