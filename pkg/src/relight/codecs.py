"""Image file codecs: PNG (8/16-bit, via OpenCV) and PFM floats.

PNG carries LDR images and masks; PFM (little-endian, ``PF``/``Pf``
header) carries float images such as normals, shading and albedo.
"""

import os
import struct
import tempfile

import cv2
import numpy as np

from .errors import ContractError, DecodeError
from .image import ImageF, Mask

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _validate_png_structure(blob):
    """Walk the chunk layout; raise DecodeError with the failing offset."""
    if len(blob) < 8 or blob[:8] != _PNG_SIGNATURE:
        raise DecodeError("not a PNG file (bad signature)", offset=0)
    pos = 8
    saw_end = False
    while pos < len(blob):
        if pos + 8 > len(blob):
            raise DecodeError("truncated PNG chunk header", offset=pos)
        (length,) = struct.unpack(">I", blob[pos:pos + 4])
        ctype = blob[pos + 4:pos + 8]
        if not all(65 <= c <= 122 for c in ctype):
            raise DecodeError(f"invalid chunk type {ctype!r}", offset=pos + 4)
        end = pos + 8 + length + 4
        if end > len(blob):
            raise DecodeError(f"truncated {ctype.decode('latin1')} chunk", offset=pos)
        if ctype == b"IEND":
            saw_end = True
            break
        pos = end
    if not saw_end:
        raise DecodeError("missing IEND chunk", offset=len(blob))


def decode_png(blob: bytes) -> ImageF:
    """Decode PNG bytes to an sRGB (color) or scalar (gray) ImageF in [0,1]."""
    _validate_png_structure(blob)
    raw = cv2.imdecode(np.frombuffer(blob, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DecodeError("PNG pixel data failed to decode", offset=8)
    peak = 65535.0 if raw.dtype == np.uint16 else 255.0
    data = raw.astype(np.float32) / peak
    if data.ndim == 2:
        return ImageF(data[..., None], "scalar")
    if data.shape[2] >= 3:  # BGR(A) -> RGB(A)
        data = data[..., [2, 1, 0] + ([3] if data.shape[2] == 4 else [])]
    return ImageF(data, "srgb")


def encode_png(img: ImageF, bits=8) -> bytes:
    """Encode to PNG at 8 or 16 bits; values are clamped to [0,1]."""
    if bits not in (8, 16):
        raise ContractError(f"png bit depth must be 8 or 16, got {bits}")
    peak = 65535 if bits == 16 else 255
    dtype = np.uint16 if bits == 16 else np.uint8
    data = np.clip(img.data, 0.0, 1.0)
    quant = np.round(data.astype(np.float64) * peak).astype(dtype)
    if quant.shape[2] == 1:
        quant = quant[..., 0]
    elif quant.shape[2] >= 3:
        quant = quant[..., [2, 1, 0] + ([3] if quant.shape[2] == 4 else [])]
    ok, buf = cv2.imencode(".png", quant)
    if not ok:
        raise ContractError("PNG encode failed")
    return buf.tobytes()


def load_png(path) -> ImageF:
    with open(path, "rb") as f:
        return decode_png(f.read())


def save_png(path, img: ImageF, bits=8):
    _atomic_write(path, encode_png(img, bits=bits))


def load_mask_png(path) -> Mask:
    img = load_png(path)
    data = img.data.mean(axis=-1) if img.channels > 1 else img.data[..., 0]
    return Mask(data)


def save_mask_png(path, mask: Mask):
    save_png(path, ImageF(mask.data[..., None], "scalar"), bits=8)


# ---------------------------------------------------------------------------
# PFM

def decode_pfm(blob: bytes) -> ImageF:
    """Decode PFM bytes; scanlines are stored bottom-up per convention."""
    try:
        header, rest = blob.split(b"\n", 1)
    except ValueError:
        raise DecodeError("missing PFM header line", offset=0)
    if header == b"PF":
        channels = 3
    elif header == b"Pf":
        channels = 1
    else:
        raise DecodeError(f"bad PFM magic {header[:8]!r}", offset=0)
    try:
        dims, rest = rest.split(b"\n", 1)
        w, h = (int(t) for t in dims.split())
        scale_line, rest = rest.split(b"\n", 1)
        scale = float(scale_line)
    except ValueError:
        raise DecodeError("malformed PFM dimension/scale lines", offset=len(header) + 1)
    count = w * h * channels
    if len(rest) < count * 4:
        raise DecodeError("truncated PFM pixel data", offset=len(blob) - len(rest))
    endian = "<" if scale < 0 else ">"
    data = np.frombuffer(rest[:count * 4], dtype=endian + "f4").reshape(h, w, channels)
    data = data[::-1].astype(np.float32)
    if abs(scale) not in (0.0, 1.0):
        data = data * abs(scale)
    return ImageF(data, "linear-rgb" if channels == 3 else "scalar")


def encode_pfm(img: ImageF) -> bytes:
    if img.channels not in (1, 3):
        raise ContractError(f"PFM supports 1 or 3 channels, got {img.channels}")
    magic = b"PF" if img.channels == 3 else b"Pf"
    header = magic + b"\n%d %d\n-1.0\n" % (img.width, img.height)
    data = img.data[::-1].astype("<f4")
    return header + data.tobytes()


def load_pfm(path) -> ImageF:
    with open(path, "rb") as f:
        return decode_pfm(f.read())


def save_pfm(path, img: ImageF):
    _atomic_write(path, encode_pfm(img))


def _atomic_write(path, blob: bytes):
    """Write via a temp file in the target directory plus rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
