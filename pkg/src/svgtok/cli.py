"""Command-line front end wiring the pipeline.

Subcommands: preprocess, build-vocab, train-segments, encode, decode, stats,
partition, init-embeddings. Inputs may be a single file, a directory, or a
``.list`` file of newline-delimited paths; batch runs stream one sample at a
time, log and skip failing samples, and write every output atomically. The
zero-flag defaults are the standard configuration (canvas 784, tolerance 10,
500 merges, minimum pair frequency 2, 16 RBF bases, degree-3 polynomial).

Exit codes: 0 success, 1 I/O or data errors (the offending path is named),
2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from functools import partial
from pathlib import Path

from . import __version__
from .atomic import (
    AtomicVocab,
    build_vocab,
    count_tokens,
    decode_atomic,
    encode_atomic,
    id_lines_to_seq,
    seq_to_id_lines,
    seq_to_text,
    text_to_seq,
)
from .errors import SvgTokError
from .fileio import atomic_write_text
from .ir import serialize_svg
from .metrics import (
    STAGE_BOUNDARIES,
    cleaning_report,
    compression_report,
    digit_splitting_counter,
    partition_by_length,
    stage_of,
)
from .preprocess import PreprocessConfig, preprocess
from .segments import SegmentVocab, encode_segments, expand_segments
from .segments import load_vocab as load_segment_vocab
from .segments import save_vocab as save_segment_vocab
from .segments import segment_stats, train

_SVG_SUFFIXES = (".svg",)
_TOKEN_SUFFIXES = (".tokens", ".ids", ".txt")
_BASELINE_NAME = "digit-split"


class UsageError(Exception):
    """A flag combination that fails validation before any work starts."""


class InputError(Exception):
    """An unusable input or output path; the message names it."""


# ---- shared plumbing ----


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None


def _jobs(args: argparse.Namespace) -> int:
    jobs = args.jobs if args.jobs is not None else _env_int("SVGTOK_JOBS")
    if jobs is None:
        jobs = 1
    if jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = _env_int("SVGTOK_SEED")
    return 0 if env is None else env


def _geometry(
    args: argparse.Namespace, sv: SegmentVocab | None = None
) -> tuple[int, int]:
    """Canvas and tolerance: flags, or the segment vocabulary's when loaded."""
    if sv is not None:
        canvas, tolerance = sv.vocab.canvas, sv.vocab.tolerance
        if args.canvas is not None and args.canvas != canvas:
            raise UsageError(
                f"--canvas {args.canvas} conflicts with the segment "
                f"vocabulary (canvas {canvas})"
            )
        if args.tolerance is not None and args.tolerance != tolerance:
            raise UsageError(
                f"--tolerance {args.tolerance} conflicts with the segment "
                f"vocabulary (tolerance {tolerance})"
            )
        return canvas, tolerance
    canvas = 784 if args.canvas is None else args.canvas
    tolerance = 10 if args.tolerance is None else args.tolerance
    if canvas < 1:
        raise UsageError(f"--canvas must be >= 1, got {canvas}")
    if tolerance < 0:
        raise UsageError(f"--tolerance must be >= 0, got {tolerance}")
    return canvas, tolerance


def _load_segments(path: str | None) -> SegmentVocab | None:
    if path is None:
        return None
    try:
        sv = load_segment_vocab(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    _SV_CACHE[path] = sv
    return sv


def _resolve_inputs(path: Path, suffixes: tuple[str, ...]) -> list[Path]:
    if not path.exists():
        raise InputError(f"{path}: no such file or directory")
    if path.is_dir():
        found = sorted(
            p for p in path.iterdir() if p.is_file() and p.suffix in suffixes
        )
        if not found:
            raise InputError(f"{path}: no input samples found")
        return found
    if path.suffix == ".list":
        lines = path.read_text(encoding="utf-8").splitlines()
        found = [Path(line.strip()) for line in lines if line.strip()]
        if not found:
            raise InputError(f"{path}: the list names no input samples")
        return found
    return [path]


def _is_batch(path: Path) -> bool:
    return path.is_dir() or path.suffix == ".list"


# Per-process caches so parallel workers load shared state once each.
_VOCAB_CACHE: dict[tuple[int, int], AtomicVocab] = {}
_SV_CACHE: dict[str, SegmentVocab] = {}


def _vocab(canvas: int, tolerance: int) -> AtomicVocab:
    key = (canvas, tolerance)
    if key not in _VOCAB_CACHE:
        _VOCAB_CACHE[key] = build_vocab(canvas, tolerance)
    return _VOCAB_CACHE[key]


def _sv(path: str | None) -> SegmentVocab | None:
    if path is None:
        return None
    if path not in _SV_CACHE:
        _SV_CACHE[path] = load_segment_vocab(path)
    return _SV_CACHE[path]


def _render_preprocess(in_path: str, canvas: int, tolerance: int) -> str:
    text = Path(in_path).read_text(encoding="utf-8")
    doc = preprocess(text, PreprocessConfig(canvas=canvas, tolerance=tolerance))
    return serialize_svg(doc) + "\n"


def _render_encode(
    in_path: str, canvas: int, tolerance: int, sv_path: str | None, fmt: str
) -> str:
    text = Path(in_path).read_text(encoding="utf-8")
    doc = preprocess(text, PreprocessConfig(canvas=canvas, tolerance=tolerance))
    vocab = _vocab(canvas, tolerance)
    seq = encode_atomic(doc, vocab)
    sv = _sv(sv_path)
    if sv is not None:
        seq = encode_segments(seq, sv)
    if fmt == "ids":
        return seq_to_id_lines(seq) + "\n"
    composites = sv.composite_strings if sv is not None else None
    return seq_to_text(seq, vocab, composites) + "\n"


def _render_decode(
    in_path: str, canvas: int, tolerance: int, sv_path: str | None, fmt: str
) -> str:
    raw = Path(in_path).read_text(encoding="utf-8")
    vocab = _vocab(canvas, tolerance)
    sv = _sv(sv_path)
    stripped = raw.strip()
    use_ids = fmt == "ids" or (fmt == "auto" and not stripped.startswith("<"))
    if use_ids:
        seq = id_lines_to_seq(raw)
    else:
        composites = sv.composite_ids if sv is not None else None
        seq = text_to_seq(stripped, vocab, composites)
    if sv is not None:
        seq = expand_segments(seq, sv)
    return serialize_svg(decode_atomic(seq, vocab)) + "\n"


def _job_render(task: tuple[str, str], render) -> tuple[str, str | None]:
    """Render one sample to its output file; never raises (batch skip)."""
    in_path, out_path = task
    try:
        atomic_write_text(Path(out_path), render(in_path))
        return in_path, None
    except Exception as exc:  # logged and skipped by the caller
        return in_path, f"{type(exc).__name__}: {exc}"


def _execute(tasks: list[tuple[str, str]], job, jobs: int) -> tuple[int, int]:
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, tasks))
    else:
        results = [job(task) for task in tasks]
    ok = skipped = 0
    for name, err in results:
        if err is None:
            ok += 1
        else:
            skipped += 1
            print(f"skip {name}: {err}", file=sys.stderr)
    return ok, skipped


def _run_files(
    args: argparse.Namespace,
    suffixes: tuple[str, ...],
    render,
    out_suffix: str,
    verb: str,
) -> int:
    in_path = Path(args.input)
    inputs = _resolve_inputs(in_path, suffixes)
    if not _is_batch(in_path):
        rendered = render(str(inputs[0]))
        if args.output is None:
            sys.stdout.write(rendered)
            return 0
        out = Path(args.output)
        if out.is_dir():
            out = out / (inputs[0].stem + out_suffix)
        atomic_write_text(out, rendered)
        print(f"{verb} 1 sample -> {out}")
        return 0
    if args.output is None:
        raise UsageError("batch input requires --output DIRECTORY")
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    tasks = [(str(p), str(outdir / (p.stem + out_suffix))) for p in inputs]
    ok, skipped = _execute(tasks, partial(_job_render, render=render), _jobs(args))
    print(f"{verb} {ok} samples -> {outdir} ({skipped} skipped)")
    return 0 if ok else 1


def _iter_docs(
    inputs: list[Path],
    config: PreprocessConfig,
    failures: dict[str, str],
    log: bool,
):
    """Stream (path, document) pairs, recording failures once across passes."""
    for path in inputs:
        if str(path) in failures:
            continue
        try:
            text = path.read_text(encoding="utf-8")
            yield path, preprocess(text, config)
        except Exception as exc:
            failures[str(path)] = f"{type(exc).__name__}: {exc}"
            if log:
                print(f"skip {path}: {failures[str(path)]}", file=sys.stderr)


# ---- subcommands ----


def _cmd_preprocess(args: argparse.Namespace) -> int:
    canvas, tolerance = _geometry(args)
    render = partial(_render_preprocess, canvas=canvas, tolerance=tolerance)
    return _run_files(args, _SVG_SUFFIXES, render, ".svg", "preprocessed")


def _cmd_build_vocab(args: argparse.Namespace) -> int:
    from .report import write_json

    canvas, tolerance = _geometry(args)
    vocab = build_vocab(canvas, tolerance)
    if args.output is not None:
        write_json(
            {
                "canvas": canvas,
                "tolerance": tolerance,
                "size": len(vocab),
                "tokens": list(vocab.tokens),
            },
            args.output,
        )
    print(f"{len(vocab)} tokens")
    return 0


def _cmd_train_segments(args: argparse.Namespace) -> int:
    if args.merges < 0:
        raise UsageError(f"--merges must be >= 0, got {args.merges}")
    if args.min_freq < 1:
        raise UsageError(f"--min-freq must be >= 1, got {args.min_freq}")
    canvas, tolerance = _geometry(args)
    config = PreprocessConfig(canvas=canvas, tolerance=tolerance)
    vocab = _vocab(canvas, tolerance)
    inputs = _resolve_inputs(Path(args.input), _SVG_SUFFIXES)
    failures: dict[str, str] = {}
    seqs = (
        encode_atomic(doc, vocab)
        for _, doc in _iter_docs(inputs, config, failures, log=True)
    )
    sv = train(seqs, m_merges=args.merges, f_min=args.min_freq, vocab=vocab)
    save_segment_vocab(sv, args.output)
    n_ok = len(inputs) - len(failures)
    print(
        f"trained {len(sv.merges)} merges from {n_ok} samples -> "
        f"{args.output} ({len(failures)} skipped)"
    )
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    sv = _load_segments(args.segments)
    canvas, tolerance = _geometry(args, sv)
    render = partial(
        _render_encode,
        canvas=canvas,
        tolerance=tolerance,
        sv_path=args.segments,
        fmt=args.format,
    )
    suffix = ".ids" if args.format == "ids" else ".tokens"
    return _run_files(args, _SVG_SUFFIXES, render, suffix, "encoded")


def _cmd_decode(args: argparse.Namespace) -> int:
    sv = _load_segments(args.segments)
    canvas, tolerance = _geometry(args, sv)
    render = partial(
        _render_decode,
        canvas=canvas,
        tolerance=tolerance,
        sv_path=args.segments,
        fmt=args.format,
    )
    return _run_files(args, _TOKEN_SUFFIXES, render, ".svg", "decoded")


def _cmd_stats(args: argparse.Namespace) -> int:
    from .report import (
        cleaning_rows,
        compression_rows,
        format_table,
        render_figures,
        segment_rows,
        stage_rows,
        write_csv,
        write_json,
    )

    sv = _load_segments(args.segments)
    canvas, tolerance = _geometry(args, sv)
    config = PreprocessConfig(canvas=canvas, tolerance=tolerance)
    vocab = _vocab(canvas, tolerance)
    if sv is None:
        sv = SegmentVocab(vocab, 0, 2, (), ())
    inputs = _resolve_inputs(Path(args.input), _SVG_SUFFIXES)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    failures: dict[str, str] = {}

    def docs(log: bool = False):
        return (doc for _, doc in _iter_docs(inputs, config, failures, log))

    def seqs():
        return (encode_atomic(doc, vocab) for doc in docs())

    compression = compression_report(
        docs(log=True), vocab, sv, digit_splitting_counter, _BASELINE_NAME
    )
    cleaning = cleaning_report(seqs(), vocab)
    buckets = partition_by_length(seqs())
    segments = segment_stats(sv, seqs()) if sv.merges else None

    payload = {
        "compression": compression.as_dict(),
        "cleaning": {
            "samples": cleaning.samples,
            "removed_counts": cleaning.removed_counts,
            "motif_counts": cleaning.motif_counts,
            "removed_per_command": cleaning.removed_per_command,
            "redundancy_mass": cleaning.redundancy_mass,
        },
        "stages": buckets.as_dict(),
        "segments": segments,
        "skipped": len(failures),
    }
    write_json(payload, outdir / "stats.json")
    write_csv(compression_rows(compression), outdir / "compression.csv")
    write_csv(cleaning_rows(cleaning), outdir / "cleaning.csv")
    write_csv(stage_rows(buckets), outdir / "stages.csv")
    if segments is not None:
        write_csv(segment_rows(segments), outdir / "segments.csv")
    figures = render_figures(
        outdir / "figures",
        compression=compression,
        cleaning=cleaning,
        buckets=buckets,
        segments=segments,
    )
    table = {
        "compression": compression.as_dict(),
        "cleaning": {
            "samples": cleaning.samples,
            "removed_per_command": cleaning.removed_per_command,
            "redundancy_mass": cleaning.redundancy_mass,
        },
        "stages": buckets.counts,
    }
    sys.stdout.write(format_table(table, title="corpus statistics"))
    print(
        f"stats over {compression.n_samples} samples -> {outdir} "
        f"({len(figures)} figures, {len(failures)} skipped)"
    )
    return 0


def _cmd_partition(args: argparse.Namespace) -> int:
    from .report import write_json

    canvas, tolerance = _geometry(args)
    config = PreprocessConfig(canvas=canvas, tolerance=tolerance)
    vocab = _vocab(canvas, tolerance)
    inputs = _resolve_inputs(Path(args.input), _SVG_SUFFIXES)
    failures: dict[str, str] = {}
    assignment: dict[str, str] = {}
    for path, doc in _iter_docs(inputs, config, failures, log=True):
        n_tokens = count_tokens(encode_atomic(doc, vocab))
        assignment[path.name] = stage_of(n_tokens)
    counts = {"S1": 0, "S2": 0, "S3": 0, "discard": 0}
    for stage in assignment.values():
        counts[stage] += 1
    payload = {
        "boundaries": list(STAGE_BOUNDARIES),
        "counts": counts,
        "assignment": assignment,
        "skipped": len(failures),
    }
    summary = (
        f"partitioned {len(assignment)} samples: "
        + ", ".join(f"{stage}={counts[stage]}" for stage in counts)
        + f" ({len(failures)} skipped)"
    )
    if args.output is None:
        write = sys.stdout.write
        write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(summary, file=sys.stderr)
    else:
        write_json(payload, args.output)
        print(summary)
    return 0


def _cmd_init_embeddings(args: argparse.Namespace) -> int:
    from .embed_init import (
        HmnParams,
        build_token_metas,
        init_vocab,
        load_base_table,
        load_description_ids,
        save_manifest,
        save_matrix,
    )

    try:
        base = load_base_table(args.base_table)
    except OSError as exc:
        raise InputError(f"{args.base_table}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise InputError(f"{args.base_table}: {exc}") from exc
    sv = _load_segments(args.segments)
    canvas, tolerance = _geometry(args, sv)
    vocab = _vocab(canvas, tolerance)
    try:
        params = HmnParams(
            lambda_mu=args.lambda_mu,
            lambda_n=args.lambda_n,
            w_sem=args.w_sem,
            w_num=args.w_num,
            k_rbf=args.rbf,
            poly_degree=args.poly_degree,
            seed=_seed(args),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    descriptions = None
    if args.descriptions is not None:
        try:
            descriptions = load_description_ids(args.descriptions)
        except OSError as exc:
            raise InputError(f"{args.descriptions}: {exc.strerror or exc}") from exc
        except ValueError as exc:
            raise InputError(f"{args.descriptions}: {exc}") from exc
    metas = build_token_metas(vocab, sv, descriptions)
    matrix = init_vocab(metas, base, params)
    save_matrix(matrix, args.output, fmt=args.format)
    manifest = args.manifest or f"{args.output}.manifest.json"
    save_manifest(manifest, params, (meta.token for meta in metas))
    print(
        f"initialized {matrix.shape[0]} x {matrix.shape[1]} embeddings -> "
        f"{args.output} (manifest {manifest})"
    )
    return 0


# ---- parser ----


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svgtok",
        description="Hierarchical SVG tokenization pipeline.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    geometry = argparse.ArgumentParser(add_help=False)
    geometry.add_argument("--canvas", type=int, default=None, help="canvas size (default 784)")
    geometry.add_argument("--tolerance", type=int, default=None, help="out-of-canvas slack (default 10)")

    io_args = argparse.ArgumentParser(add_help=False)
    io_args.add_argument("input", help="sample file, directory, or .list of paths")
    io_args.add_argument("-o", "--output", default=None, help="output file or directory")

    jobs_args = argparse.ArgumentParser(add_help=False)
    jobs_args.add_argument("--jobs", type=int, default=None, help="parallel workers (env SVGTOK_JOBS)")

    seg_args = argparse.ArgumentParser(add_help=False)
    seg_args.add_argument("--segments", default=None, help="segment vocabulary JSON")

    p = sub.add_parser("preprocess", parents=[io_args, geometry, jobs_args],
                       help="canonicalize raw SVG files")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("build-vocab", parents=[geometry],
                       help="enumerate the atomic vocabulary")
    p.add_argument("-o", "--output", default=None, help="write the token list as JSON")
    p.set_defaults(func=_cmd_build_vocab)

    p = sub.add_parser("train-segments", parents=[io_args, geometry],
                       help="learn segment merges from a corpus")
    p.add_argument("--merges", type=int, default=500, help="merge budget (default 500)")
    p.add_argument("--min-freq", type=int, default=2, help="stop below this pair count (default 2)")
    p.set_defaults(func=_cmd_train_segments)
    p.set_defaults(require_output=True)

    p = sub.add_parser("encode", parents=[io_args, geometry, jobs_args, seg_args],
                       help="SVG -> token stream")
    p.add_argument("--format", choices=("text", "ids"), default="text")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", parents=[io_args, geometry, jobs_args, seg_args],
                       help="token stream -> SVG")
    p.add_argument("--format", choices=("auto", "text", "ids"), default="auto")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("stats", parents=[io_args, geometry, seg_args],
                       help="corpus reports: JSON, CSV, and figures")
    p.set_defaults(func=_cmd_stats)
    p.set_defaults(require_output=True)

    p = sub.add_parser("partition", parents=[io_args, geometry],
                       help="assign samples to curriculum stages")
    p.set_defaults(func=_cmd_partition)

    p = sub.add_parser("init-embeddings", parents=[geometry, seg_args],
                       help="structured embedding rows for every token")
    p.add_argument("--base-table", required=True, help="base embedding matrix file")
    p.add_argument("-o", "--output", required=True, help="output matrix file")
    p.add_argument("--manifest", default=None, help="manifest path (default OUTPUT.manifest.json)")
    p.add_argument("--descriptions", default=None, help="token description-id manifest JSON")
    p.add_argument("--format", choices=("binary", "json"), default="binary")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (env SVGTOK_SEED, default 0)")
    p.add_argument("--lambda-mu", type=float, default=0.8)
    p.add_argument("--lambda-n", type=float, default=0.02)
    p.add_argument("--w-sem", type=float, default=0.1)
    p.add_argument("--w-num", type=float, default=0.08)
    p.add_argument("--rbf", type=int, default=16, help="RBF basis count")
    p.add_argument("--poly-degree", type=int, default=3)
    p.set_defaults(func=_cmd_init_embeddings)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "require_output", False) and args.output is None:
            raise UsageError(f"{args.subcommand} requires --output")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        path = getattr(exc, "filename", None)
        detail = exc.strerror or exc
        print(f"error: {path or args.subcommand}: {detail}", file=sys.stderr)
        return 1
    except SvgTokError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
