"""Parameter-compression and FLOP accounting."""

from ..config import CompressionAssumptions
from .analysis import (
    DEFAULT_BONDS,
    HEAD_SPLITS,
    PUBLISHED_REDUCTIONS,
    CompressionReport,
    LayerRow,
    bond_sweep,
    flop_parity_bond,
    flop_ratio,
    flops_estimate,
    format_table,
    layer_params,
    layer_reduction,
    model_assumptions,
    model_reduction,
    param_parity_bond,
    split_sweep,
    sweep_frame,
    write_compression_report,
)

__all__ = [
    'CompressionAssumptions', 'DEFAULT_BONDS', 'HEAD_SPLITS', 'PUBLISHED_REDUCTIONS',
    'CompressionReport', 'LayerRow', 'layer_params', 'layer_reduction', 'param_parity_bond',
    'flop_parity_bond', 'flops_estimate', 'flop_ratio', 'model_assumptions', 'model_reduction', 'bond_sweep',
    'split_sweep', 'sweep_frame', 'format_table', 'write_compression_report',
]
