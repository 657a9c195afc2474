"""
tt-contrastive: tensor-train factorized dense layers in a contrastive
self-supervised learning pipeline, with parameter-compression analysis and
training-throughput benchmarks.
"""

__version__ = "0.1.0"
