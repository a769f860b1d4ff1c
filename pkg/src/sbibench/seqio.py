"""Image and sequence I/O, dataset manifests, and shared color transforms.

Images are plain numpy arrays of dtype uint8: shape (H, W) for grayscale,
(H, W, 3) for RGB.  Native formats are binary PGM ("P5") and PPM ("P6"),
decoded and encoded here byte-for-byte; 8-bit PNG is supported through
Pillow as a convenience.  Sequences are directories of numbered frames
described by a small text manifest.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    """Raised for unsupported or malformed image files."""


class ManifestError(ValueError):
    """Raised for malformed manifest or scene-script files."""


# ---------------------------------------------------------------------------
# image arrays

def validate_image(img) -> np.ndarray:
    """Check that `img` is a uint8 array shaped (H, W) or (H, W, 3)."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"image dtype must be uint8, got {img.dtype}")
    if img.ndim == 2:
        pass
    elif img.ndim == 3 and img.shape[2] == 3:
        pass
    else:
        raise ValueError(f"image shape must be (H, W) or (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must have at least one row and one column")
    return img


def channels_of(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


# ---------------------------------------------------------------------------
# Netpbm (binary PGM/PPM)

_TOKEN = re.compile(rb"^\S+")


def _read_netpbm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Pull `count` whitespace/comment-delimited header tokens; return them
    and the offset one whitespace byte past the last token."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise ImageFormatError("truncated header")
        c = data[pos:pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ImageFormatError("truncated header")
            pos = nl + 1
        else:
            m = _TOKEN.match(data[pos:])
            tokens.append(m.group(0))
            pos += len(m.group(0))
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos:pos + 1] not in b" \t\r\n":
        raise ImageFormatError("truncated header")
    return tokens, pos + 1


def _decode_netpbm(data: bytes) -> np.ndarray:
    magic = data[:2]
    nch = {b"P5": 1, b"P6": 3}.get(magic)
    if nch is None:
        raise ImageFormatError(f"unsupported magic {magic!r} (want binary P5/P6)")
    tokens, offset = _read_netpbm_tokens(data[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"non-numeric header fields {tokens}") from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval} (only 8-bit, maxval 255)")
    payload = data[2 + offset:]
    need = width * height * nch
    if len(payload) < need:
        raise ImageFormatError(f"truncated payload: {len(payload)} of {need} bytes")
    arr = np.frombuffer(payload[:need], dtype=np.uint8)
    return arr.reshape((height, width) if nch == 1 else (height, width, nch)).copy()


def _encode_netpbm(img: np.ndarray) -> bytes:
    magic = b"P5" if img.ndim == 2 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.shape[1], img.shape[0])
    return header + np.ascontiguousarray(img).tobytes()


# ---------------------------------------------------------------------------
# load/save

def load_image(path) -> np.ndarray:
    """Load a PGM/PPM/PNG file as a uint8 array, (H, W) or (H, W, 3)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P6"):
        return _decode_netpbm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    if data[:2] in (b"P1", b"P2", b"P3", b"P4"):
        raise ImageFormatError(f"unsupported magic {data[:2]!r} (want binary P5/P6)")
    raise ImageFormatError(f"unrecognized image format in {path.name}")


def _load_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            raise ImageFormatError(
                f"unsupported PNG mode {im.mode!r} (only 8-bit gray or RGB)")
        return np.asarray(im, dtype=np.uint8).copy()


def save_image(img: np.ndarray, path, format: str | None = None) -> None:
    """Write `img` to `path` as pgm, ppm, or png (inferred from the suffix
    when `format` is None).  The format must match the channel count:
    PGM is 1-channel, PPM is 3-channel, PNG is either."""
    img = validate_image(img)
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    nch = channels_of(img)
    if fmt == "pgm":
        if nch != 1:
            raise ValueError("PGM stores 1-channel images only")
        path.write_bytes(_encode_netpbm(img))
    elif fmt == "ppm":
        if nch != 3:
            raise ValueError("PPM stores 3-channel images only")
        path.write_bytes(_encode_netpbm(img))
    elif fmt == "png":
        from PIL import Image

        Image.fromarray(img, mode="L" if nch == 1 else "RGB").save(path, format="PNG")
    else:
        raise ValueError(f"unknown image format {fmt!r} (want pgm, ppm, or png)")


# ---------------------------------------------------------------------------
# color transforms

_Y_WEIGHTS = (299, 587, 114)  # BT.601 full-range, scaled by 1000


def luminance(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB image, rounded half away from zero.

    Computed as (299 R + 587 G + 114 B + 500) // 1000 in exact integer
    arithmetic, so results are bit-reproducible.  1-channel input is
    returned unchanged.
    """
    img = validate_image(img)
    if img.ndim == 2:
        return img
    wr, wg, wb = _Y_WEIGHTS
    p = img.astype(np.int32)
    y = (wr * p[..., 0] + wg * p[..., 1] + wb * p[..., 2] + 500) // 1000
    return y.astype(np.uint8)


@dataclass(frozen=True)
class SignedPlanes:
    """Integer Y/U/V planes of the reversible color transform.

    y lies in [0, 255]; u and v in [-255, 255].
    """

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray


def rct_forward(img: np.ndarray) -> SignedPlanes:
    """Lossless RCT of an RGB image: Y = floor((R + 2G + B)/4), U = R - G,
    V = B - G.  Exactly invertible by `rct_inverse`."""
    img = validate_image(img)
    if img.ndim != 3:
        raise ValueError("reversible color transform needs a 3-channel image")
    p = img.astype(np.int16)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    y = (r + 2 * g + b) >> 2
    return SignedPlanes(y=y, u=r - g, v=b - g)


def rct_inverse(planes: SignedPlanes) -> np.ndarray:
    """Invert `rct_forward`: G = Y - floor((U+V)/4), R = U + G, B = V + G."""
    y = planes.y.astype(np.int16)
    u = planes.u.astype(np.int16)
    v = planes.v.astype(np.int16)
    g = y - ((u + v) >> 2)
    return np.stack([u + g, g, v + g], axis=-1).astype(np.uint8)


# ---------------------------------------------------------------------------
# sequences

@dataclass
class BootstrapSequence:
    """An ordered stack of same-shape frames available for estimation.

    frames has shape (T, H, W) or (T, H, W, 3), dtype uint8; first_index is
    the original frame number of frames[0].
    """

    name: str
    frames: np.ndarray
    first_index: int = 0

    def __post_init__(self):
        f = np.asarray(self.frames)
        if f.dtype != np.uint8 or f.ndim not in (3, 4) or (f.ndim == 4 and f.shape[3] != 3):
            raise ValueError("frames must be uint8 with shape (T, H, W) or (T, H, W, 3)")
        if f.shape[0] < 1:
            raise ValueError("a sequence needs at least one frame")
        object.__setattr__(self, "frames", f)

    @classmethod
    def from_frames(cls, name: str, frames, first_index: int = 0) -> "BootstrapSequence":
        """Stack an iterable of equally shaped images into a sequence."""
        stack = [validate_image(f) for f in frames]
        shapes = {f.shape for f in stack}
        if len(shapes) != 1:
            raise ValueError(f"frames disagree on shape: {sorted(shapes)}")
        return cls(name=name, frames=np.stack(stack), first_index=first_index)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple:
        return self.frames.shape[1:]


@dataclass(frozen=True)
class SequenceSpec:
    """Where a sequence lives on disk: a directory of numbered frames plus a
    reference background image ("ground truth")."""

    name: str
    directory: Path
    pattern: str  # printf-style filename template, e.g. "in%06d.png"
    first: int
    last: int
    gt_path: Path

    def __post_init__(self):
        if self.first > self.last:
            raise ValueError(f"{self.name}: first ({self.first}) > last ({self.last})")
        try:
            self.pattern % 0
        except (TypeError, ValueError):
            raise ValueError(f"{self.name}: bad filename pattern {self.pattern!r}") from None

    def frame_path(self, index: int) -> Path:
        return Path(self.directory) / (self.pattern % index)


def load_sequence(spec: SequenceSpec) -> tuple[BootstrapSequence, np.ndarray]:
    """Load all frames spec.first..spec.last plus the reference background.

    Every frame must exist and share dimensions and channel count with the
    reference image.
    """
    gt = load_image(spec.gt_path)
    frames = []
    for idx in range(spec.first, spec.last + 1):
        p = spec.frame_path(idx)
        if not p.exists():
            raise FileNotFoundError(f"{spec.name}: missing frame file {p}")
        frame = load_image(p)
        if frame.shape != gt.shape:
            raise ValueError(
                f"{spec.name}: frame {idx} shape {frame.shape} does not match "
                f"reference {gt.shape}")
        frames.append(frame)
    seq = BootstrapSequence(name=spec.name, frames=np.stack(frames), first_index=spec.first)
    return seq, gt


# ---------------------------------------------------------------------------
# manifests (and the shared block text format)

def parse_blocks(text: str, source: str = "<string>") -> list[tuple[str, dict]]:
    """Parse the `[header]` / `key = value` block format shared by manifests
    and scene scripts.  Blank lines and `#` comments are ignored."""
    blocks: list[tuple[str, dict]] = []
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            blocks.append((line[1:-1].strip(), current))
            continue
        if "=" not in line:
            raise ManifestError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ManifestError(f"{source}:{lineno}: key-value line outside any [block]")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current:
            raise ManifestError(f"{source}:{lineno}: duplicate key {key!r}")
        current[key] = value.strip()
    return blocks


_MANIFEST_KEYS = {"name", "dir", "pattern", "first", "last", "gt"}


def load_manifest(path, root=None) -> list[SequenceSpec]:
    """Read a dataset manifest: one [sequence] block per entry with keys
    name, dir, pattern, first, last, gt.  Relative paths resolve against
    `root` (default: the manifest's own directory)."""
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    specs = []
    for header, kv in parse_blocks(path.read_text(encoding="utf-8"), source=str(path)):
        if header != "sequence":
            raise ManifestError(f"{path}: unknown block [{header}]")
        unknown = set(kv) - _MANIFEST_KEYS
        if unknown:
            raise ManifestError(f"{path}: unknown keys {sorted(unknown)} in [sequence]")
        missing = _MANIFEST_KEYS - set(kv)
        if missing:
            raise ManifestError(f"{path}: missing keys {sorted(missing)} in [sequence]")
        try:
            first, last = int(kv["first"]), int(kv["last"])
        except ValueError:
            raise ManifestError(f"{path}: first/last must be integers") from None
        specs.append(SequenceSpec(
            name=kv["name"],
            directory=root / kv["dir"],
            pattern=kv["pattern"],
            first=first,
            last=last,
            gt_path=root / kv["gt"],
        ))
    if not specs:
        raise ManifestError(f"{path}: no [sequence] blocks found")
    return specs


def default_manifest_path() -> Path:
    """The bundled manifest describing the seven SBI benchmark sequences."""
    return Path(__file__).parent / "manifests" / "sbi.manifest"
