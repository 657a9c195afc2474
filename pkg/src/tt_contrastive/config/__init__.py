"""
Configuration package for the tensorized contrastive-learning engine.

This package provides a unified configuration interface for all components.
"""

from .config import (
    AugmentConfig,
    BenchConfig,
    CompressionAssumptions,
    DatasetConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
    load_config,
    parse_int_list,
    read_config_file,
)

__all__ = [
    'AugmentConfig',
    'TrainConfig',
    'DatasetConfig',
    'ModelConfig',
    'CompressionAssumptions',
    'BenchConfig',
    'RunConfig',
    'load_config',
    'parse_int_list',
    'read_config_file',
]
