"""Run metrics and metadata."""

from .run_recorder import EpochMetrics, RunRecorder, host_description, resident_memory_mb

__all__ = ['EpochMetrics', 'RunRecorder', 'host_description', 'resident_memory_mb']
