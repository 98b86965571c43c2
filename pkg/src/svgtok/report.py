"""Report emission: JSON, delimited CSV, and PNG figures.

Every writer goes through an atomic temp-file rename and is deterministic for
a given payload. Figures render through the Agg backend, so no display is
needed.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .fileio import atomic_write_bytes, atomic_write_text
from .metrics import CompressionReport, StageBuckets
from .segments import NoiseReport

_STAGES = ("S1", "S2", "S3", "discard")
_PNG_METADATA = {"Software": "svgtok"}


def write_json(payload: dict, path: str | Path) -> None:
    atomic_write_text(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(rows: list[list], path: str | Path) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write_text(Path(path), buf.getvalue())


def compression_rows(report: CompressionReport) -> list[list]:
    return [["metric", "value"], *[[k, v] for k, v in report.as_dict().items()]]


def cleaning_rows(report: NoiseReport) -> list[list]:
    rows: list[list] = [["section", "key", "value"]]
    rows.append(["samples", "", report.samples])
    for op, rate in report.removed_per_command.items():
        rows.append(["removed_per_command", op, rate])
    for motif, mass in report.redundancy_mass.items():
        rows.append(["redundancy_mass", motif, mass])
    return rows


def stage_rows(buckets: StageBuckets) -> list[list]:
    counts = buckets.counts
    return [["stage", "count"], *[[stage, counts[stage]] for stage in _STAGES]]


def segment_rows(stats: dict) -> list[list]:
    rows: list[list] = [["bucket", "field", "key", "value"]]
    rows.append(["all", "total_composites", "", stats["total_composites"]])
    for name, bucket in stats["buckets"].items():
        rows.append([name, "composites", "", bucket["composites"]])
        rows.append([name, "usage", "", bucket["usage"]])
        for op, share in bucket["command_shares"].items():
            rows.append([name, "command_share", op, share])
        if bucket["length"] is not None:
            for key in ("min", "q1", "median", "q3", "max"):
                rows.append([name, "length", key, bucket["length"][key]])
    return rows


def _flatten(obj: dict, prefix: str = "") -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = []
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.extend(_flatten(value, name + "."))
        else:
            out.append((name, value))
    return out


def format_table(payload: dict, title: str = "") -> str:
    """Aligned key/value text rendering of a (possibly nested) payload."""
    pairs = _flatten(payload)
    width = max((len(k) for k, _ in pairs), default=0)
    lines = [title, "-" * len(title)] if title else []
    for key, value in pairs:
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        lines.append(f"{key.ljust(width)}  {text}")
    return "\n".join(lines) + "\n"


def _pyplot():
    """Import pyplot on first use with the non-interactive backend, keeping
    matplotlib out of the import path of the delimited writers."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save_fig(fig, path: Path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, metadata=_PNG_METADATA)
    _pyplot().close(fig)
    atomic_write_bytes(path, buf.getvalue())
    return path


def render_figures(
    outdir: str | Path,
    *,
    compression: CompressionReport | None = None,
    cleaning: NoiseReport | None = None,
    buckets: StageBuckets | None = None,
    segments: dict | None = None,
) -> list[Path]:
    """Render one PNG per provided report into ``outdir``; returns the paths."""
    plt = _pyplot()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if compression is not None:
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        ax.bar(
            ["raw → atomic", "atomic → segment"],
            [compression.ratio_raw_to_at, compression.ratio_at_to_st],
            color=["#4c72b0", "#dd8452"],
        )
        ax.axhline(1.0, color="grey", lw=0.8, ls="--")
        ax.set_ylabel("compression ratio")
        ax.set_title(f"Token compression ({compression.n_samples} samples)")
        fig.tight_layout()
        written.append(_save_fig(fig, outdir / "compression_ratios.png"))

    if cleaning is not None:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.5))
        removed = cleaning.removed_per_command
        ax1.bar(list(removed), list(removed.values()), color="#4c72b0")
        ax1.set_title("removed per command (avg/sample)")
        mass = cleaning.redundancy_mass
        ax2.bar(list(mass), list(mass.values()), color="#dd8452")
        ax2.set_title("redundancy mass")
        ax2.tick_params(axis="x", labelrotation=20)
        fig.tight_layout()
        written.append(_save_fig(fig, outdir / "cleaning_report.png"))

    if buckets is not None:
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        counts = buckets.counts
        ax.bar(_STAGES, [counts[s] for s in _STAGES], color="#55a868")
        ax.set_ylabel("samples")
        ax.set_title("curriculum stage distribution")
        fig.tight_layout()
        written.append(_save_fig(fig, outdir / "stage_distribution.png"))

    if segments is not None:
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        names = [n for n, b in segments["buckets"].items() if b["length"] is not None]
        if names:
            med = [segments["buckets"][n]["length"]["median"] for n in names]
            low = [m - segments["buckets"][n]["length"]["q1"] for n, m in zip(names, med)]
            high = [segments["buckets"][n]["length"]["q3"] - m for n, m in zip(names, med)]
            ax.bar(names, med, yerr=[low, high], capsize=4, color="#8172b3")
        ax.set_ylabel("atomic tokens per composite")
        ax.set_title(
            f"composite lengths by usage bucket ({segments['total_composites']} total)"
        )
        fig.tight_layout()
        written.append(_save_fig(fig, outdir / "segment_lengths.png"))

    return written
