"""PGM images and a minimal raw volume container.

Volume files start with one ASCII header line

    ADLBRv1 <kind> <d> <n_1> ... <n_d> <h>

followed by little-endian float32 samples in row-major order.  ``kind`` is
``scalar``, ``sym2`` or ``sym3``; symmetric tensors store their upper
triangle (xx, xy, yy or xx, xy, xz, yy, yz, zz) per cell.
"""

from pathlib import Path

import numpy as np

from adlbr.errors import FormatError
from adlbr.operator import Boundary, ScalarField, TensorField

VOLUME_MAGIC = "ADLBRv1"
KIND_COMPONENTS = {"scalar": 1, "sym2": 3, "sym3": 6}
_UPPER = {2: [(0, 0), (0, 1), (1, 1)], 3: [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]}


def _pgm_tokens(data, count, start):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise FormatError("malformed header: unexpected end of file")
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_pgm(path, boundary=Boundary.NEUMANN):
    """Read a P2 or P5 PGM file as a field scaled to [0, 1], with h = 1."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"unsupported magic {magic!r}")
    tokens, pos = _pgm_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError("malformed header: non-integer field") from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise FormatError(f"malformed header: size {width}x{height}, maxval {maxval}")
    count = width * height
    if magic == b"P5":
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise FormatError("malformed header: missing separator before raster")
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(data) - pos < count * dtype.itemsize:
            raise FormatError("truncated payload")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(float)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise FormatError("truncated payload")
        try:
            raw = np.array([int(t) for t in body[:count]], dtype=float)
        except ValueError:
            raise FormatError("malformed raster: non-integer sample") from None
    if raw.max(initial=0) > maxval:
        raise FormatError("malformed raster: sample exceeds maxval")
    return ScalarField(raw.reshape(height, width) / maxval, 1.0, boundary)


def quantize(values, clip):
    """Affine map of [lo, hi] onto 0..255 with clamping, ties away from zero."""
    lo, hi = clip
    if not hi > lo:
        raise ValueError("empty clip range")
    scaled = np.clip((np.asarray(values, dtype=float) - lo) / (hi - lo), 0.0, 1.0) * 255.0
    # scaled >= 0, so floor(x + 1/2) rounds ties away from zero
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_pgm(u, path, clip=(0.0, 1.0)):
    """Write a 2D field as binary 8-bit PGM."""
    if u.dim != 2:
        raise ValueError("write_pgm expects a 2D field")
    q = quantize(u.values, clip)
    height, width = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def write_volume(field, path):
    """Store a ScalarField or TensorField as an ADLBRv1 container."""
    if isinstance(field, TensorField):
        d = field.dim
        kind = f"sym{d}"
        payload = np.stack([field.values[..., i, j] for i, j in _UPPER[d]], axis=-1)
    elif isinstance(field, ScalarField):
        d = field.dim
        kind = "scalar"
        payload = field.values
    else:
        raise TypeError("expected a ScalarField or TensorField")
    extents = " ".join(str(n) for n in field.shape)
    header = f"{VOLUME_MAGIC} {kind} {d} {extents} {field.h!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(payload, dtype="<f4").tobytes())


def read_volume(path, boundary=Boundary.NEUMANN):
    """Read an ADLBRv1 container back into a ScalarField or TensorField."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("malformed header: no header line")
    try:
        fields = data[:nl].decode("ascii").split()
    except UnicodeDecodeError:
        raise FormatError("malformed header: not ASCII") from None
    if not fields or fields[0] != VOLUME_MAGIC:
        raise FormatError(f"unsupported magic {fields[0] if fields else ''!r}")
    if len(fields) < 3:
        raise FormatError("malformed header: missing kind or dimension")
    kind = fields[1]
    if kind not in KIND_COMPONENTS:
        raise FormatError(f"unknown kind {kind!r}")
    try:
        d = int(fields[2])
    except ValueError:
        raise FormatError("malformed header: dimension") from None
    if d not in (2, 3):
        raise FormatError(f"unsupported dimension {d}")
    if kind != "scalar" and kind != f"sym{d}":
        raise FormatError(f"kind {kind} does not match dimension {d}")
    if len(fields) != 4 + d:
        raise FormatError("malformed header: wrong number of fields")
    try:
        extents = tuple(int(x) for x in fields[3 : 3 + d])
        h = float(fields[3 + d])
    except ValueError:
        raise FormatError("malformed header: extents or spacing") from None
    if min(extents) < 1 or not h > 0:
        raise FormatError("malformed header: extents must be >= 1 and h > 0")
    comps = KIND_COMPONENTS[kind]
    count = comps
    for n in extents:
        count *= n
    available = len(data) - nl - 1
    if available < 4 * count:
        raise FormatError("truncated payload")
    if available > 4 * count:
        raise FormatError("malformed payload: trailing bytes")
    raw = np.frombuffer(data, dtype="<f4", count=count, offset=nl + 1).astype(float)
    if kind == "scalar":
        return ScalarField(raw.reshape(extents), h, boundary)
    raw = raw.reshape(extents + (comps,))
    D = np.empty(extents + (d, d))
    for c, (i, j) in enumerate(_UPPER[d]):
        D[..., i, j] = raw[..., c]
        D[..., j, i] = raw[..., c]
    return TensorField(D, h, boundary)


__all__ = ["read_pgm", "write_pgm", "read_volume", "write_volume", "quantize"]
