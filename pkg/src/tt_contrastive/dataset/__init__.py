"""CCSN-layout image datasets, codecs and the synthetic stand-in corpus."""

from .classes import ABBREVIATIONS, CCSN_COUNTS, CCSN_URL, CLASS_INDEX, CLASS_TABLE, NUM_CLASSES, CloudClass
from .codecs import (
    decode_image,
    decode_pixels,
    decode_png,
    decode_ppm,
    encode_png,
    encode_ppm,
    jpeg_available,
    quantize,
)
from .loader import (
    Dataset,
    Sample,
    class_count_frame,
    export_manifest,
    gen_synthetic,
    load_dataset,
    manifest_frame,
    split_80_20,
    split_indices,
    synthetic_image,
)

__all__ = [
    'CloudClass', 'CLASS_TABLE', 'ABBREVIATIONS', 'CLASS_INDEX', 'NUM_CLASSES', 'CCSN_COUNTS', 'CCSN_URL',
    'decode_image', 'decode_pixels', 'decode_ppm', 'decode_png', 'encode_ppm', 'encode_png',
    'jpeg_available', 'quantize',
    'Sample', 'Dataset', 'load_dataset', 'split_indices', 'split_80_20', 'gen_synthetic',
    'synthetic_image', 'manifest_frame', 'class_count_frame', 'export_manifest',
]
