"""
Benchmark report type and its CSV, JSON and SVG renderings.

CSV columns are fixed: batch, variant, median_s, min_s, mean_s, flops,
speedup. The speedup column is empty for dense rows. The SVG is written by
hand as grouped bars of speedup per batch size.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional
from xml.sax.saxutils import escape

import pandas as pd

from ..errors import ConfigError, NonPositiveTimeError, ReportError, UnwritablePathError
from .timing import speedup

logger = logging.getLogger(__name__)

BASELINE = "dense"
VARIANTS = ("dense", "tt", "tt-alt")
CSV_COLUMNS = ["batch", "variant", "median_s", "min_s", "mean_s", "flops", "speedup"]
REPORT_FORMATS = ("csv", "json", "svg")
TIMING_BASIS = "per-iteration"

VARIANT_COLORS = {"tt": "#4878d0", "tt-alt": "#ee854a"}


@dataclass
class BenchRow:
    """Timings of one variant at one batch size."""

    batch: int
    variant: str
    median_s: float
    min_s: float
    mean_s: float
    flops: int


@dataclass
class BenchReport:
    """
    Timing rows of a batch-size sweep plus the environment they were taken in.

    Attributes:
        mode: 'layer' or 'training'
        environment: Thread count, accumulator dtype and host description
        rows: One row per (batch, variant)
        setup: Dimensions, splits, bond, repeats and warmup of the run
        predicted_sign: +1 when the FLOP count predicts the factorized variant
            faster, -1 when slower, 0 at parity
        timing_basis: What one timed sample covers
    """

    mode: str
    environment: Dict[str, Any] = field(default_factory=dict)
    rows: List[BenchRow] = field(default_factory=list)
    setup: Dict[str, Any] = field(default_factory=dict)
    predicted_sign: Optional[int] = None
    timing_basis: str = TIMING_BASIS

    @property
    def batch_sizes(self) -> List[int]:
        return sorted({row.batch for row in self.rows})

    @property
    def variants(self) -> List[str]:
        present = {row.variant for row in self.rows}
        return [v for v in VARIANTS if v in present]

    def row(self, batch: int, variant: str) -> Optional[BenchRow]:
        return next((r for r in self.rows if r.batch == batch and r.variant == variant), None)

    def speedup(self, batch: int, variant: str = "tt") -> float:
        """Speedup of ``variant`` over the dense row of the same batch, on medians."""
        base, other = self.row(batch, BASELINE), self.row(batch, variant)
        if base is None or other is None:
            raise ReportError(f"no {BASELINE}/{variant} pair for batch {batch}")
        return speedup(base.median_s, other.median_s)

    def speedups(self, variant: str = "tt") -> Dict[int, float]:
        return {batch: self.speedup(batch, variant) for batch in self.batch_sizes
                if self.row(batch, variant) is not None}

    def validate(self) -> "BenchReport":
        """
        Raises:
            ReportError: empty report, unknown variant, or a row without its dense pair
            NonPositiveTimeError: a non-positive time
        """
        if not self.rows:
            raise ReportError("benchmark report has no rows")
        for row in self.rows:
            if row.variant not in VARIANTS:
                raise ReportError(f"unknown variant '{row.variant}'")
            if min(row.median_s, row.min_s, row.mean_s) <= 0:
                raise NonPositiveTimeError(f"non-positive time in row {asdict(row)}")
            if row.variant != BASELINE and self.row(row.batch, BASELINE) is None:
                raise ReportError(f"{row.variant} row at batch {row.batch} has no dense counterpart")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "timing_basis": self.timing_basis,
            "environment": self.environment,
            "setup": self.setup,
            "predicted_sign": self.predicted_sign,
            "rows": [asdict(row) for row in self.rows],
            "speedups": {variant: {str(b): s for b, s in self.speedups(variant).items()}
                         for variant in self.variants if variant != BASELINE},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BenchReport":
        """Inverse of ``to_dict``; derived speedups are recomputed, not read."""
        try:
            rows = [BenchRow(int(r["batch"]), r["variant"], float(r["median_s"]), float(r["min_s"]),
                             float(r["mean_s"]), int(r["flops"])) for r in data["rows"]]
            return cls(
                mode=data["mode"],
                environment=dict(data.get("environment", {})),
                rows=rows,
                setup=dict(data.get("setup", {})),
                predicted_sign=data.get("predicted_sign"),
                timing_basis=data.get("timing_basis", TIMING_BASIS),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError(f"malformed benchmark report: {e}")


def report_frame(report: BenchReport) -> pd.DataFrame:
    """Rows in CSV column order; speedup is NaN for dense rows."""
    records = []
    for row in report.rows:
        record = asdict(row)
        record["speedup"] = None if row.variant == BASELINE else report.speedup(row.batch, row.variant)
        records.append(record)
    frame = pd.DataFrame(records, columns=CSV_COLUMNS)
    frame["speedup"] = frame["speedup"].astype(float)
    return frame


def format_bench_table(report: BenchReport) -> str:
    """Aligned-text rendering for the console."""
    header = [f"mode: {report.mode}  timing: {report.timing_basis}"]
    header.extend(f"  {key}: {value}" for key, value in report.environment.items()
                  if key in ("threads", "accumulate_dtype"))
    return "\n".join(header) + "\n" + report_frame(report).to_string(index=False, na_rep="-") + "\n"


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

SVG_WIDTH = 480
SVG_HEIGHT = 320
MARGIN_LEFT = 60
MARGIN_RIGHT = 20
MARGIN_TOP = 30
MARGIN_BOTTOM = 50


def _num(value: float) -> str:
    return f"{value:.2f}"


def render_svg(report: BenchReport) -> str:
    """
    Grouped bars of speedup per batch size, one group per batch and one bar
    per factorized variant, with a zero line and labelled axes.
    """
    variants = [v for v in report.variants if v != BASELINE]
    batches = report.batch_sizes
    values = {(b, v): report.speedup(b, v) for b in batches for v in variants
              if report.row(b, v) is not None}
    hi = max([0.0, *values.values()])
    lo = min([0.0, *values.values()])
    if hi == lo:
        hi = 1.0
    plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    zero_y = MARGIN_TOP + plot_h * hi / (hi - lo)
    group_w = plot_w / max(len(batches), 1)
    bar_w = group_w * 0.6 / max(len(variants), 1)
    bottom = MARGIN_TOP + plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<title>{escape(report.mode)} speedup per batch size</title>',
        f'<line class="axis" x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{bottom}" stroke="black"/>',
        f'<line class="axis" x1="{MARGIN_LEFT}" y1="{_num(zero_y)}" x2="{SVG_WIDTH - MARGIN_RIGHT}" '
        f'y2="{_num(zero_y)}" stroke="black"/>',
    ]
    ticks = [(hi, MARGIN_TOP), (lo, bottom)]
    if MARGIN_TOP < zero_y < bottom:
        ticks.append((0.0, zero_y))
    for label, y in ticks:
        parts.append(f'<text class="tick" x="{MARGIN_LEFT - 6}" y="{_num(y + 4)}" '
                     f'text-anchor="end">{label:.3f}</text>')
    for i, batch in enumerate(batches):
        group_x = MARGIN_LEFT + i * group_w
        for j, variant in enumerate(variants):
            if (batch, variant) not in values:
                continue
            s = values[(batch, variant)]
            height = plot_h * abs(s) / (hi - lo)
            y = zero_y - height if s >= 0 else zero_y
            x = group_x + group_w * 0.2 + j * bar_w
            parts.append(
                f'<rect class="bar" data-batch="{batch}" data-variant="{escape(variant)}" '
                f'x="{_num(x)}" y="{_num(y)}" width="{_num(bar_w)}" height="{_num(height)}" '
                f'fill="{VARIANT_COLORS[variant]}"><title>batch {batch} {escape(variant)}: '
                f'{s:.4f}</title></rect>'
            )
        parts.append(f'<text class="tick" x="{_num(group_x + group_w / 2)}" y="{bottom + 18}" '
                     f'text-anchor="middle">{batch}</text>')
    parts.append(f'<text class="axis-label" x="{_num(MARGIN_LEFT + plot_w / 2)}" y="{SVG_HEIGHT - 10}" '
                 f'text-anchor="middle">batch size</text>')
    parts.append(f'<text class="axis-label" x="{_num(-(MARGIN_TOP + plot_h / 2))}" y="16" '
                 f'transform="rotate(-90)" text-anchor="middle">speedup vs dense</text>')
    if len(variants) > 1:
        for j, variant in enumerate(variants):
            parts.append(f'<text class="legend" x="{SVG_WIDTH - MARGIN_RIGHT}" y="{MARGIN_TOP + 14 * j}" '
                         f'text-anchor="end" fill="{VARIANT_COLORS[variant]}">{escape(variant)}</text>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def emit_report(report: BenchReport, fmt: str, path) -> Path:
    """
    Write one rendering of ``report`` to ``path``.

    Raises:
        ReportError: empty or inconsistent report
        ConfigError: unknown format
        UnwritablePathError: the destination cannot be written
    """
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"report format must be one of {REPORT_FORMATS}, got '{fmt}'", key="format")
    report.validate()
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            report_frame(report).to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
        elif fmt == "json":
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(report.to_dict(), f, indent=2)
                f.write("\n")
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(render_svg(report))
    except OSError as e:
        raise UnwritablePathError(str(path), str(e))
    logger.info(f"Benchmark {fmt} report written to {path}")
    return path


def write_bench_reports(report: BenchReport, out_dir, stem: str = "bench",
                        formats=REPORT_FORMATS) -> Dict[str, Path]:
    """Every requested rendering of ``report`` under ``out_dir``."""
    out_dir = Path(out_dir)
    return {fmt: emit_report(report, fmt, out_dir / f"{stem}.{fmt}") for fmt in formats}
