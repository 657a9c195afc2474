"""Layer and training-iteration benchmarks with CSV/JSON/SVG reports."""

from ..config import BenchConfig
from .harness import (
    bench_environment,
    bench_layer,
    bench_spec,
    bench_training,
    layer_input,
    predicted_sign,
    resolve_batches,
    runtime_settings,
    tt_forward_alt,
)
from .report import (
    CSV_COLUMNS,
    REPORT_FORMATS,
    VARIANTS,
    BenchReport,
    BenchRow,
    emit_report,
    format_bench_table,
    render_svg,
    report_frame,
    write_bench_reports,
)
from .timing import TimingStats, check_repeats, sm_batch_sweep, speedup, time_repeats

__all__ = [
    'BenchConfig', 'bench_layer', 'bench_training', 'bench_spec', 'bench_environment',
    'layer_input', 'predicted_sign', 'resolve_batches', 'runtime_settings', 'tt_forward_alt',
    'BenchReport', 'BenchRow', 'CSV_COLUMNS', 'REPORT_FORMATS', 'VARIANTS',
    'emit_report', 'format_bench_table', 'render_svg', 'report_frame', 'write_bench_reports',
    'TimingStats', 'check_repeats', 'sm_batch_sweep', 'speedup', 'time_repeats',
]
