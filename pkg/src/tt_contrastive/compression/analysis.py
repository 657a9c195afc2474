"""
Parameter and FLOP accounting for dense versus TT-factorized layers.

Whole-model figures count the encoder as an opaque number of parameters,
the first projection layer as dense or TT, and the remaining projection
layers as dense. Both the whole-model and the single-layer reading of the
reduction rate are reported, next to the published reference values.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..config import CompressionAssumptions, ModelConfig
from ..errors import ConfigError, ReportError, UnwritablePathError
from ..nn import TTDenseSpec

logger = logging.getLogger(__name__)

DEFAULT_BONDS = (16, 32, 64, 128, 256)

# Whole-model reduction rates published for bond dimensions 16..256.
PUBLISHED_REDUCTIONS: Dict[int, float] = {16: 0.954, 32: 0.950, 64: 0.942, 128: 0.926, 256: 0.894}

HEAD_SPLITS = ((16, 256), (32, 128), (64, 64))


def layer_params(spec: TTDenseSpec, include_bias: bool = False) -> Tuple[int, int]:
    """
    (tt_count, dense_count) for one factorized layer.

    tt_count = a·c·r + b·d·r and dense_count = a·b·c·d, each plus c·d when the
    bias is included.
    """
    a, b, c, d, r = spec.as_tuple()
    bias = c * d if include_bias else 0
    return a * c * r + b * d * r + bias, a * b * c * d + bias


def layer_reduction(spec: TTDenseSpec, include_bias: bool = False) -> float:
    tt_count, dense_count = layer_params(spec, include_bias)
    return 1.0 - tt_count / dense_count


def param_parity_bond(spec: TTDenseSpec) -> Fraction:
    """Bond at which the TT layer has as many weights as the dense one: abcd/(ac+bd)."""
    a, b, c, d, _ = spec.as_tuple()
    return Fraction(a * b * c * d, a * c + b * d)


def flop_parity_bond(spec: TTDenseSpec) -> Fraction:
    """Bond at which the TT forward costs as much as the dense one: ad/(a+d)."""
    a, _, _, d, _ = spec.as_tuple()
    return Fraction(a * d, a + d)


def flops_estimate(spec: TTDenseSpec, batch: int = 1) -> Tuple[int, int]:
    """
    Forward FLOPs (a multiply-add counts as two) of the TT and dense layer.

    tt = 2·batch·(a·b·c·r + b·c·d·r), dense = 2·batch·a·b·c·d.
    """
    a, b, c, d, r = spec.as_tuple()
    return 2 * batch * (a * b * c * r + b * c * d * r), 2 * batch * a * b * c * d


def flop_ratio(spec: TTDenseSpec) -> Fraction:
    """tt_flops / dense_flops as an exact fraction, equal to r(a+d)/(ad)."""
    tt, dense = flops_estimate(spec)
    return Fraction(tt, dense)


@dataclass
class LayerRow:
    name: str
    kind: str
    dense_params: int
    actual_params: int

    @property
    def reduction(self) -> float:
        return 1.0 - self.actual_params / self.dense_params if self.dense_params else 0.0


@dataclass
class CompressionReport:
    """
    Per-layer parameter accounting of one model configuration.

    Attributes:
        bond: Bond dimension of the factorized layer
        rows: One row per layer; totals are their exact sums
        assumptions: The dimension assumptions used, echoed verbatim
        published_reduction: Published whole-model reduction for this bond, if any
    """

    bond: int
    rows: List[LayerRow]
    assumptions: Dict[str, Any] = field(default_factory=dict)
    published_reduction: Optional[float] = None

    @property
    def total_dense(self) -> int:
        return sum(row.dense_params for row in self.rows)

    @property
    def total_actual(self) -> int:
        return sum(row.actual_params for row in self.rows)

    @property
    def reduction_rate(self) -> float:
        return 1.0 - self.total_actual / self.total_dense

    @property
    def single_layer_reduction(self) -> float:
        tt_rows = [row for row in self.rows if row.kind == "tt"]
        return tt_rows[0].reduction if tt_rows else 0.0

    @property
    def deviation_points(self) -> Optional[float]:
        """|computed − published| in percentage points."""
        if self.published_reduction is None:
            return None
        return abs(self.reduction_rate - self.published_reduction) * 100.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bond": self.bond,
            "rows": [{**asdict(row), "reduction": row.reduction} for row in self.rows],
            "total_dense": self.total_dense,
            "total_actual": self.total_actual,
            "reduction_rate": self.reduction_rate,
            "single_layer_reduction": self.single_layer_reduction,
            "published_reduction": self.published_reduction,
            "deviation_points": self.deviation_points,
            "assumptions": self.assumptions,
        }


def _assumption_spec(assumptions: CompressionAssumptions, bond: int) -> TTDenseSpec:
    spec = TTDenseSpec(tuple(assumptions.in_split), tuple(assumptions.out_split), bond)
    return spec.validate(assumptions.flatten_dim, assumptions.head[0])


def model_assumptions(cfg: ModelConfig, encoder_params: int,
                      include_bias: bool = True) -> CompressionAssumptions:
    """Assumptions describing a concrete model config, for cross-checking its parameter count."""
    return CompressionAssumptions(
        encoder_params=encoder_params,
        flatten_dim=cfg.feature_dim,
        head=tuple(cfg.head),
        in_split=tuple(cfg.in_split),
        out_split=tuple(cfg.out_split),
        include_bias=include_bias,
    )


def model_reduction(assumptions: CompressionAssumptions, bond: int) -> CompressionReport:
    """
    Whole-model parameter accounting with the first projection layer factorized.

    Raises:
        IndivisibleSplitError: the splits do not factor flatten_dim → head[0]
    """
    spec = _assumption_spec(assumptions, bond)
    include_bias = assumptions.include_bias
    tt_count, dense_count = layer_params(spec, include_bias)
    rows = [
        LayerRow("encoder", "opaque", assumptions.encoder_params, assumptions.encoder_params),
        LayerRow("projection0", "tt", dense_count, tt_count),
    ]
    widths = list(assumptions.head)
    for i in range(1, len(widths)):
        count = widths[i - 1] * widths[i] + (widths[i] if include_bias else 0)
        rows.append(LayerRow(f"projection{i}", "dense", count, count))
    return CompressionReport(bond, rows, asdict(assumptions), PUBLISHED_REDUCTIONS.get(bond))


def bond_sweep(assumptions: CompressionAssumptions,
               bonds: Sequence[int] = DEFAULT_BONDS) -> List[CompressionReport]:
    """One report per bond, in the given order."""
    if not bonds:
        raise ConfigError("bond sweep needs at least one bond", key="bonds")
    reports = [model_reduction(assumptions, bond) for bond in bonds]
    for report in reports:
        logger.debug(f"bond {report.bond}: model reduction {report.reduction_rate:.4%}")
    return reports


def split_sweep(in_split: Tuple[int, int] = (256, 256), bond: int = 16,
                out_splits: Sequence[Tuple[int, int]] = HEAD_SPLITS,
                include_bias: bool = False) -> pd.DataFrame:
    """
    Parameter and FLOP comparison of output splits with equal product.

    Rows report the TT/dense FLOP ratio and both parity bonds, showing that the
    split choice alone changes the expected speedup.
    """
    rows = []
    for out_split in out_splits:
        spec = TTDenseSpec(tuple(in_split), tuple(out_split), bond)
        tt_count, dense_count = layer_params(spec, include_bias)
        rows.append({
            "out_split": f"{out_split[0]}x{out_split[1]}",
            "bond": bond,
            "tt_params": tt_count,
            "dense_params": dense_count,
            "flop_ratio": float(flop_ratio(spec)),
            "param_parity_bond": float(param_parity_bond(spec)),
            "flop_parity_bond": float(flop_parity_bond(spec)),
        })
    return pd.DataFrame(rows)


def sweep_frame(reports: Sequence[CompressionReport]) -> pd.DataFrame:
    """Tabular view of a bond sweep: both readings plus published values."""
    return pd.DataFrame([{
        "bond": r.bond,
        "tt_layer_params": next((row.actual_params for row in r.rows if row.kind == "tt"), 0),
        "dense_layer_params": next((row.dense_params for row in r.rows if row.kind == "tt"), 0),
        "layer_reduction_pct": round(r.single_layer_reduction * 100.0, 4),
        "model_total_params": r.total_actual,
        "model_dense_params": r.total_dense,
        "model_reduction_pct": round(r.reduction_rate * 100.0, 4),
        "published_reduction_pct": None if r.published_reduction is None else round(r.published_reduction * 100.0, 1),
        "deviation_pts": None if r.deviation_points is None else round(r.deviation_points, 4),
    } for r in reports])


def format_table(reports: Sequence[CompressionReport]) -> str:
    """Aligned-text rendering of a bond sweep with the assumptions block."""
    if not reports:
        raise ReportError("nothing to format: empty bond sweep")
    lines = ["Assumptions (reconstructed, not published):"]
    lines.extend(f"  {key}: {value}" for key, value in reports[0].assumptions.items())
    lines.append("")
    lines.append(sweep_frame(reports).to_string(index=False, na_rep="-"))
    return "\n".join(lines) + "\n"


def write_compression_report(reports: Sequence[CompressionReport], out_dir, stem: str = "compression",
                             splits: Optional[pd.DataFrame] = None) -> Dict[str, Path]:
    """Write text, CSV and JSON renderings of a bond sweep into ``out_dir``."""
    out_dir = Path(out_dir)
    paths = {fmt: out_dir / f"{stem}.{ext}" for fmt, ext in (("text", "txt"), ("csv", "csv"), ("json", "json"))}
    payload = {
        "assumptions": reports[0].assumptions if reports else {},
        "reports": [r.to_dict() for r in reports],
    }
    if splits is not None:
        payload["head_splits"] = splits.to_dict(orient="records")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths["text"].write_text(format_table(reports), encoding="utf-8")
        sweep_frame(reports).to_csv(paths["csv"], index=False, lineterminator="\n")
        with open(paths["json"], "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
    except OSError as e:
        raise UnwritablePathError(str(out_dir), str(e))
    logger.info(f"Compression report written to {out_dir}")
    return paths
