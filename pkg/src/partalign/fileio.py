"""Binary and text file formats.

Every binary format is little-endian with a 4-byte ASCII magic and a u32
version:

* ``ISPF``: feature sets.   Header: n, c, h, w.  Records: image_id u32,
  person_id u32, camera_id u32, then h*w*c float32 row-major,
  channel-fastest (i.e. an (h, w, c) C-order block).
* ``ISPL``: label maps.     Header: n, h, w, K.  Records: image_id u32,
  person_id u32, then h*w uint8 labels (255 = unlabeled).
* ``ISPW``: classifier weights.  Header: K, c.  Payload: K*c float32
  row-major.
* ``ISPV``: pooled descriptors.  Header: n, K, c.  Records: image_id u32,
  person_id u32, camera_id u32, (K-1) uint8 visibility flags, (K-1)*c
  float32 part vectors, c float32 foreground vector, c float32 global
  vector.
* ``ISPD``: distance matrices.  Header: q, g.  Payload: q*g float32
  row-major.

Distance matrices can also be exported as TSV text (q rows, g columns).
Floating-point payloads are stored as float32; loaders hand back float32
so a save/load round trip is bit-exact.
"""

import struct

import numpy as np

from .errors import FormatError, ValidationError
from .features import Descriptor, FeatureMap, FeatureMapSet, LabelMap
from .validation import check_finite

_VERSION = 1
_U32 = struct.Struct("<I")


def _write_u32(f, *values):
    for v in values:
        v = int(v)
        if v < 0 or v > 0xFFFFFFFF:
            raise ValidationError(f"value {v} does not fit in u32")
        f.write(_U32.pack(v))


def _read_exact(f, size, what):
    buf = f.read(size)
    if len(buf) != size:
        raise FormatError(f"truncated file: expected {size} bytes for {what}, got {len(buf)}")
    return buf


def _read_u32(f, what):
    return _U32.unpack(_read_exact(f, 4, what))[0]


def _check_magic(f, magic):
    got = f.read(4)
    if got != magic:
        raise FormatError(f"bad magic: expected {magic!r}, got {got!r}")
    ver = _read_u32(f, "version")
    if ver != _VERSION:
        raise FormatError(f"unsupported version {ver} (expected {_VERSION})")


def _read_f32(f, count, what):
    buf = _read_exact(f, 4 * count, what)
    arr = np.frombuffer(buf, dtype="<f4").copy()
    check_finite(arr, what)
    return arr


def save_feature_set(fset, path):
    """Write a FeatureMapSet as an ISPF file."""
    with open(path, "wb") as f:
        f.write(b"ISPF")
        _write_u32(f, _VERSION, fset.n, fset.c, fset.h, fset.w)
        for m in fset.maps:
            _write_u32(f, m.image_id, m.person_id, m.camera_id)
            f.write(np.ascontiguousarray(m.data, dtype="<f4").tobytes())


def load_feature_set(path):
    """Read an ISPF file into a FeatureMapSet."""
    with open(path, "rb") as f:
        _check_magic(f, b"ISPF")
        n = _read_u32(f, "n")
        c = _read_u32(f, "c")
        h = _read_u32(f, "h")
        w = _read_u32(f, "w")
        if n < 1 or c < 1 or h < 1 or w < 1:
            raise FormatError(f"header dimensions must be >= 1, got n={n} c={c} h={h} w={w}")
        maps = []
        for i in range(n):
            image_id = _read_u32(f, f"record {i} image_id")
            person_id = _read_u32(f, f"record {i} person_id")
            camera_id = _read_u32(f, f"record {i} camera_id")
            flat = _read_f32(f, h * w * c, f"record {i} payload")
            maps.append(
                FeatureMap(image_id, person_id, camera_id, flat.reshape(h, w, c))
            )
        if f.read(1):
            raise FormatError("trailing bytes after last record")
    return FeatureMapSet(tuple(maps))


def save_label_maps(lmaps, path):
    """Write label maps as an ISPL file.

    All maps must share one (h, w) and one n_classes.
    """
    lmaps = list(lmaps)
    if not lmaps:
        raise ValidationError("need at least one label map")
    h, w, k = lmaps[0].h, lmaps[0].w, lmaps[0].n_classes
    for lm in lmaps:
        if (lm.h, lm.w, lm.n_classes) != (h, w, k):
            raise ValidationError("label maps disagree on shape or class count")
    with open(path, "wb") as f:
        f.write(b"ISPL")
        _write_u32(f, _VERSION, len(lmaps), h, w, k)
        for lm in lmaps:
            _write_u32(f, lm.image_id, lm.person_id)
            f.write(np.ascontiguousarray(lm.labels, dtype=np.uint8).tobytes())


def load_label_maps(path):
    """Read an ISPL file into a list of LabelMap."""
    with open(path, "rb") as f:
        _check_magic(f, b"ISPL")
        n = _read_u32(f, "n")
        h = _read_u32(f, "h")
        w = _read_u32(f, "w")
        k = _read_u32(f, "K")
        if n < 1 or h < 1 or w < 1 or k < 1:
            raise FormatError(f"header dimensions must be >= 1, got n={n} h={h} w={w} K={k}")
        out = []
        for i in range(n):
            image_id = _read_u32(f, f"record {i} image_id")
            person_id = _read_u32(f, f"record {i} person_id")
            buf = _read_exact(f, h * w, f"record {i} labels")
            labels = np.frombuffer(buf, dtype=np.uint8).reshape(h, w).copy()
            out.append(LabelMap(image_id, person_id, labels, k))
        if f.read(1):
            raise FormatError("trailing bytes after last record")
    return out


def save_weights(weights, path):
    """Write a (K, c) float weight matrix as an ISPW file."""
    arr = np.ascontiguousarray(weights, dtype="<f4")
    if arr.ndim != 2:
        raise ValidationError(f"weights must be (K, c), got shape {arr.shape}")
    check_finite(arr, "weights")
    with open(path, "wb") as f:
        f.write(b"ISPW")
        _write_u32(f, _VERSION, arr.shape[0], arr.shape[1])
        f.write(arr.tobytes())


def load_weights(path):
    """Read an ISPW file into a (K, c) float32 array."""
    with open(path, "rb") as f:
        _check_magic(f, b"ISPW")
        k = _read_u32(f, "K")
        c = _read_u32(f, "c")
        if k < 2 or c < 1:
            raise FormatError(f"weight header out of range: K={k} c={c}")
        flat = _read_f32(f, k * c, "weight payload")
        if f.read(1):
            raise FormatError("trailing bytes after weight payload")
    return flat.reshape(k, c)


def save_descriptors(descriptors, path, n_classes):
    """Write pooled descriptors as an ISPV file.

    ``n_classes`` is K (parts + background); each descriptor must carry
    K-1 part vectors.
    """
    descs = list(descriptors)
    if not descs:
        raise ValidationError("need at least one descriptor")
    n_parts = n_classes - 1
    c = descs[0].c
    for d in descs:
        if d.n_parts != n_parts or d.c != c:
            raise ValidationError("descriptors disagree on part count or channels")
    with open(path, "wb") as f:
        f.write(b"ISPV")
        _write_u32(f, _VERSION, len(descs), n_classes, c)
        for d in descs:
            _write_u32(f, d.image_id, d.person_id, d.camera_id)
            f.write(d.visibility.astype(np.uint8).tobytes())
            f.write(np.ascontiguousarray(d.part_feats, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(d.fg_feat, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(d.global_feat, dtype="<f4").tobytes())


def load_descriptors(path):
    """Read an ISPV file.

    Returns (descriptors, n_classes).
    """
    with open(path, "rb") as f:
        _check_magic(f, b"ISPV")
        n = _read_u32(f, "n")
        k = _read_u32(f, "K")
        c = _read_u32(f, "c")
        if n < 1 or k < 2 or c < 1:
            raise FormatError(f"descriptor header out of range: n={n} K={k} c={c}")
        n_parts = k - 1
        out = []
        for i in range(n):
            image_id = _read_u32(f, f"record {i} image_id")
            person_id = _read_u32(f, f"record {i} person_id")
            camera_id = _read_u32(f, f"record {i} camera_id")
            vis_buf = _read_exact(f, n_parts, f"record {i} visibility")
            vis = np.frombuffer(vis_buf, dtype=np.uint8)
            if np.any(vis > 1):
                raise FormatError(f"record {i}: visibility bytes must be 0 or 1")
            parts = _read_f32(f, n_parts * c, f"record {i} part vectors")
            fg = _read_f32(f, c, f"record {i} foreground vector")
            gl = _read_f32(f, c, f"record {i} global vector")
            out.append(
                Descriptor(
                    image_id,
                    person_id,
                    camera_id,
                    parts.reshape(n_parts, c),
                    fg,
                    gl,
                    vis.astype(bool),
                )
            )
        if f.read(1):
            raise FormatError("trailing bytes after last record")
    return out, k


def save_distances(dist, path):
    """Write a (q, g) distance matrix as an ISPD file."""
    arr = np.ascontiguousarray(dist, dtype="<f4")
    if arr.ndim != 2:
        raise ValidationError(f"distance matrix must be (q, g), got shape {arr.shape}")
    check_finite(arr, "distances")
    with open(path, "wb") as f:
        f.write(b"ISPD")
        _write_u32(f, _VERSION, arr.shape[0], arr.shape[1])
        f.write(arr.tobytes())


def load_distances(path):
    """Read an ISPD file into a (q, g) float32 array."""
    with open(path, "rb") as f:
        _check_magic(f, b"ISPD")
        q = _read_u32(f, "q")
        g = _read_u32(f, "g")
        if q < 1 or g < 1:
            raise FormatError(f"distance header out of range: q={q} g={g}")
        flat = _read_f32(f, q * g, "distance payload")
        if f.read(1):
            raise FormatError("trailing bytes after distance payload")
    return flat.reshape(q, g)


def save_distances_tsv(dist, path):
    """Write a (q, g) distance matrix as tab-separated text."""
    arr = np.asarray(dist, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"distance matrix must be (q, g), got shape {arr.shape}")
    check_finite(arr, "distances")
    with open(path, "w") as f:
        for row in arr:
            f.write("\t".join(format(v, ".17g") for v in row))
            f.write("\n")
