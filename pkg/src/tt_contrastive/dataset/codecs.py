"""
Image decoding and encoding.

PPM (binary P6) and PNG (8-bit, non-interlaced) are decoded here without
third-party code. JPEG is decoded through Pillow when it is installed
(``pip install tt-contrastive[jpeg]``).
"""

import io
import logging
import re
import struct
import zlib

import numpy as np

from ..errors import MalformedImageError, UndecodableImageError
from ..tensor import Tensor

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
JPEG_SIGNATURE = b"\xff\xd8"

# channels per PNG colour type at bit depth 8
_PNG_CHANNELS = {0: 1, 2: 3, 4: 2, 6: 4}

_PPM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def to_unit_float(pixels: np.ndarray, maxval: int = 255) -> np.ndarray:
    """Map integer samples to [0, 1] as v / maxval in float32."""
    return pixels.astype(np.float32) / np.float32(maxval)


def _to_rgb(pixels: np.ndarray) -> np.ndarray:
    """Reduce gray, gray+alpha and RGBA sample arrays to RGB (alpha dropped)."""
    channels = pixels.shape[2]
    if channels == 1:
        return np.repeat(pixels, 3, axis=2)
    if channels == 2:
        return np.repeat(pixels[:, :, :1], 3, axis=2)
    return pixels[:, :, :3]


# ---------------------------------------------------------------------------
# PPM
# ---------------------------------------------------------------------------

def decode_ppm(data: bytes) -> np.ndarray:
    """
    Decode a binary P6 PPM into an (H, W, 3) uint8 array.

    Raises:
        MalformedImageError: bad magic, header field or truncated payload
    """
    if data[:2] != b"P6":
        raise MalformedImageError("not a P6 PPM file", 0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        match = _PPM_TOKEN.match(data, pos)
        if match is None:
            raise MalformedImageError(f"missing PPM {name}", pos)
        token = match.group(1)
        if not token.isdigit():
            raise MalformedImageError(f"PPM {name} is not a number: {token!r}", match.start(1))
        fields.append(int(token))
        pos = match.end(1)
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedImageError(f"PPM size {width}x{height} is empty", pos)
    if not 1 <= maxval <= 255:
        raise MalformedImageError(f"unsupported PPM maxval {maxval}", pos)
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise MalformedImageError("PPM header must end with a single whitespace byte", pos)
    pos += 1
    expected = width * height * 3
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise MalformedImageError(
            f"PPM payload truncated: {len(payload)} of {expected} bytes", pos + len(payload)
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    if maxval != 255:
        pixels = np.round(pixels.astype(np.float64) * 255.0 / maxval).astype(np.uint8)
    return pixels


def encode_ppm(image: np.ndarray) -> bytes:
    """Encode an (H, W, 3) array in [0, 1] (or uint8) as a binary P6 PPM."""
    pixels = quantize(image)
    height, width = pixels.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def quantize(image: np.ndarray) -> np.ndarray:
    """Round [0, 1] floats to uint8; uint8 input passes through."""
    array = np.asarray(image.data if isinstance(image, Tensor) else image)
    if array.dtype == np.uint8:
        return np.ascontiguousarray(array)
    return np.clip(np.round(array.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------

def _paeth(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    p = a + b - c
    pa = np.abs(p - a)
    pb = np.abs(p - b)
    pc = np.abs(p - c)
    return np.where((pa <= pb) & (pa <= pc), a, np.where(pb <= pc, b, c))


def _unfilter(raw: bytes, height: int, width: int, bpp: int, offset: int) -> np.ndarray:
    stride = width * bpp
    if len(raw) < height * (stride + 1):
        raise MalformedImageError("PNG image data shorter than the declared size", offset)
    rows = np.frombuffer(raw, dtype=np.uint8)[: height * (stride + 1)].reshape(height, stride + 1)
    out = np.zeros((height, stride), dtype=np.int64)
    previous = np.zeros(stride, dtype=np.int64)
    for y in range(height):
        kind = int(rows[y, 0])
        line = rows[y, 1:].astype(np.int64)
        if kind == 0:
            current = line
        elif kind == 1:
            current = np.cumsum(line.reshape(width, bpp), axis=0).reshape(-1) % 256
        elif kind == 2:
            current = (line + previous) % 256
        elif kind in (3, 4):
            current = np.zeros(stride, dtype=np.int64)
            zero = np.zeros(bpp, dtype=np.int64)
            for x in range(width):
                span = slice(x * bpp, (x + 1) * bpp)
                left = current[(x - 1) * bpp:x * bpp] if x else zero
                up = previous[span]
                if kind == 3:
                    predictor = (left + up) // 2
                else:
                    up_left = previous[(x - 1) * bpp:x * bpp] if x else zero
                    predictor = _paeth(left, up, up_left)
                current[span] = (line[span] + predictor) % 256
        else:
            raise MalformedImageError(f"unknown PNG filter type {kind} in row {y}", offset)
        out[y] = current
        previous = current
    return out.astype(np.uint8).reshape(height, width, bpp)


def decode_png(data: bytes) -> np.ndarray:
    """
    Decode an 8-bit, non-interlaced PNG into an (H, W, 3) uint8 array.

    Gray, gray+alpha, RGB and RGBA colour types are accepted; alpha is
    dropped. Chunk CRCs are verified.
    """
    if data[:8] != PNG_SIGNATURE:
        raise MalformedImageError("missing PNG signature", 0)
    pos = 8
    header = None
    idat = []
    idat_offset = None
    while True:
        if pos + 8 > len(data):
            raise MalformedImageError("PNG chunk header truncated", pos)
        length, kind = struct.unpack(">I4s", data[pos:pos + 8])
        body_start = pos + 8
        body_end = body_start + length
        if body_end + 4 > len(data):
            raise MalformedImageError(f"PNG chunk {kind!r} truncated", pos)
        body = data[body_start:body_end]
        (crc,) = struct.unpack(">I", data[body_end:body_end + 4])
        if zlib.crc32(body, zlib.crc32(kind)) & 0xFFFFFFFF != crc:
            raise MalformedImageError(f"PNG chunk {kind!r} has a bad CRC", body_end)
        if kind == b"IHDR":
            if length != 13:
                raise MalformedImageError("PNG IHDR must be 13 bytes", body_start)
            header = struct.unpack(">IIBBBBB", body)
            if header[2] != 8:
                raise MalformedImageError(f"unsupported PNG bit depth {header[2]}", body_start + 8)
            if header[3] not in _PNG_CHANNELS:
                raise MalformedImageError(f"unsupported PNG colour type {header[3]}", body_start + 9)
            if header[6] != 0:
                raise MalformedImageError("interlaced PNG is not supported", body_start + 12)
        elif kind == b"IDAT":
            if idat_offset is None:
                idat_offset = body_start
            idat.append(body)
        elif kind == b"IEND":
            break
        pos = body_end + 4
    if header is None or not idat:
        raise MalformedImageError("PNG has no IHDR or IDAT chunk", pos)
    width, height, _, color_type = header[:4]
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error as e:
        raise MalformedImageError(f"PNG image data does not inflate: {e}", idat_offset)
    pixels = _unfilter(raw, height, width, _PNG_CHANNELS[color_type], idat_offset)
    return _to_rgb(pixels)


def _png_chunk(kind: bytes, body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + kind + body + struct.pack(">I", zlib.crc32(body, zlib.crc32(kind)))


def encode_png(image: np.ndarray) -> bytes:
    """Encode an (H, W, 3) image as an unfiltered 8-bit RGB PNG."""
    pixels = quantize(image)
    height, width = pixels.shape[:2]
    rows = np.concatenate([np.zeros((height, 1), dtype=np.uint8), pixels.reshape(height, width * 3)], axis=1)
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (PNG_SIGNATURE + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(rows.tobytes(), 9)) + _png_chunk(b"IEND", b""))


# ---------------------------------------------------------------------------
# JPEG (optional)
# ---------------------------------------------------------------------------

def jpeg_available() -> bool:
    try:
        import PIL.Image  # noqa: F401
    except ImportError:
        return False
    return True


def decode_jpeg(data: bytes) -> np.ndarray:
    """Decode a JPEG through Pillow."""
    try:
        from PIL import Image
    except ImportError:
        raise UndecodableImageError("<bytes>", "JPEG support needs Pillow (install the 'jpeg' extra)")
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except OSError as e:
        raise MalformedImageError(f"JPEG decoding failed: {e}", 0)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def decode_pixels(data: bytes) -> np.ndarray:
    """Decode any supported container into an (H, W, 3) uint8 array."""
    if data[:2] == b"P6":
        return decode_ppm(data)
    if data[:8] == PNG_SIGNATURE:
        return decode_png(data)
    if data[:2] == JPEG_SIGNATURE:
        return decode_jpeg(data)
    raise MalformedImageError("unrecognized image container", 0)


def decode_image(data: bytes) -> Tensor:
    """Decode image bytes into an (H, W, 3) tensor with values v / 255."""
    return Tensor(to_unit_float(decode_pixels(data)))
