"""File formats: binary PNM images (P5/P6), indexed scribble maps, point
CSVs and the flat key=value config format.

Masks are P5 with values {0, 255}. Scribble maps are P5 where pixel value
n in 1..P+1 means class n-1 and 0 means unlabeled. Point sets are
two-column CSV of real (x, y) coordinates. All writers produce
byte-identical output for identical inputs.
"""

import io

import numpy as np

from .dataterm import ScribbleSet
from .errors import InputError, ValidationError
from .fields import Grid2D


def _read_pnm_header(buf):
    def token():
        t = b""
        while True:
            ch = buf.read(1)
            if not ch:
                raise InputError("truncated PNM header")
            if ch == b"#":
                while buf.read(1) not in (b"\n", b""):
                    pass
                continue
            if ch.isspace():
                if t:
                    return t
                continue
            t += ch

    magic = token()
    if magic not in (b"P5", b"P6"):
        raise InputError(f"unsupported PNM magic {magic!r} (need binary P5/P6)")
    width = int(token())
    height = int(token())
    maxval = int(token())
    if not (0 < maxval < 65536):
        raise InputError(f"bad PNM maxval {maxval}")
    return magic.decode(), width, height, maxval


def decode_pnm(data: bytes):
    """Decode P5/P6 bytes to a uint8/uint16 array, (H, W) or (H, W, 3)."""
    buf = io.BytesIO(data)
    magic, width, height, maxval = _read_pnm_header(buf)
    channels = 3 if magic == "P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height * channels
    raw = buf.read(count * dtype.itemsize)
    if len(raw) < count * dtype.itemsize:
        raise InputError("truncated PNM pixel data")
    arr = np.frombuffer(raw, dtype=dtype, count=count)
    arr = arr.reshape((height, width, 3) if channels == 3 else (height, width))
    return arr.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def read_image(path):
    """Read a P5/P6 file as float intensities in [0, 1]."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    arr, maxval = decode_pnm(data)
    return arr.astype(np.float64) / float(maxval)


def encode_pnm(arr) -> bytes:
    """Encode a uint8 array ((H, W) -> P5, (H, W, 3) -> P6)."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValidationError("PNM writer expects uint8 data")
    if arr.ndim == 2:
        magic, (h, w) = "P5", arr.shape
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic, (h, w) = "P6", arr.shape[:2]
    else:
        raise ValidationError(f"cannot encode array of shape {arr.shape}")
    return f"{magic}\n{w} {h}\n255\n".encode() + arr.tobytes()


def write_image(path, arr):
    with open(path, "wb") as fh:
        fh.write(encode_pnm(arr))


def write_mask(path, mask):
    write_image(path, (np.asarray(mask, dtype=bool) * np.uint8(255)))


def read_mask(path):
    img = read_image(path)
    if img.ndim != 2:
        raise InputError(f"{path} is not a grayscale mask")
    return img >= 0.5


def write_label_map(path, labels):
    labels = np.asarray(labels)
    if labels.max() > 255:
        raise ValidationError("too many classes for an 8-bit label map")
    write_image(path, labels.astype(np.uint8))


def read_scribbles(path) -> ScribbleSet:
    """Indexed scribble map: value n in 1..P+1 means class n-1, 0 unlabeled."""
    try:
        with open(path, "rb") as fh:
            arr, _ = decode_pnm(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if arr.ndim != 2:
        raise InputError("scribble map must be a P5 graymap")
    grid = Grid2D(*arr.shape)
    pixels = {}
    for value in np.unique(arr):
        if value == 0:
            continue
        rows, cols = np.where(arr == value)
        pixels[int(value) - 1] = np.stack([rows, cols], axis=1)
    return ScribbleSet(grid=grid, pixels=pixels)


def write_scribbles(path, scribbles: ScribbleSet):
    arr = np.zeros(scribbles.grid.shape, dtype=np.uint8)
    for cid, pix in scribbles.pixels.items():
        arr[pix[:, 0], pix[:, 1]] = cid + 1
    write_image(path, arr)


def read_points_csv(path) -> np.ndarray:
    try:
        pts = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path} is not two-column numeric CSV: {exc}") from exc
    if pts.size == 0:
        raise InputError(f"{path} contains no points")
    if pts.shape[1] != 2:
        raise InputError(f"{path} must have exactly two columns, got {pts.shape[1]}")
    return pts


def write_points_csv(path, points):
    with open(path, "w") as fh:
        for x, y in np.asarray(points, dtype=np.float64).reshape(-1, 2):
            fh.write(f"{x:.6f},{y:.6f}\n")


# flat key=value config files ------------------------------------------------

_CONFIG_TYPES = {
    "lambda": float, "sigma": float, "theta": float, "belt_radius": int,
    "omega": float, "eps": float, "mu": float, "tau": float, "alpha": str,
    "inner_budget": int, "max_outer": int, "check_stride": int,
    "gamma": float, "seed": int, "max_samples": int, "radii": str,
    "warm_duals": bool, "belt_literal": bool, "crop": bool, "kkt_tol": float,
}


def _coerce(key, raw):
    kind = _CONFIG_TYPES[key]
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"config key {key} expects a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as exc:
        raise ValidationError(f"config key {key}: {exc}") from exc


def parse_config_text(text) -> dict:
    """Parse `key = value` lines; '#' starts a comment; unknown keys are
    rejected."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def read_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def parse_radii(raw) -> tuple:
    try:
        radii = tuple(int(tok) for tok in str(raw).replace(",", " ").split())
    except ValueError as exc:
        raise ValidationError(f"bad radii list {raw!r}") from exc
    if not radii or any(r < 1 for r in radii):
        raise ValidationError("radii must be positive integers")
    return radii
