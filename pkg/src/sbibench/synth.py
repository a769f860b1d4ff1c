"""Deterministic synthetic bootstrap sequences with a known true background.

Every random quantity (texture, flicker colors, sensor noise) is drawn from
a counter-based SplitMix64 stream keyed by (seed, purpose, frame, cell), so
rendering is bit-reproducible for a given script regardless of evaluation
order or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .seqio import BootstrapSequence, ManifestError, parse_blocks

# ---------------------------------------------------------------------------
# keyed random stream

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_P_PURPOSE = np.uint64(0x9E3779B97F4A7C15)
_P_FRAME = np.uint64(0xD1B54A32D192ED03)
_P_CELL = np.uint64(0x8CB92BA72F3D8DD7)

PURPOSE_TEXTURE = 1
PURPOSE_NOISE = 2
PURPOSE_FLICKER = 16  # + occluder index


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _stream(seed: int, purpose: int, frame: int, cells) -> np.ndarray:
    """One 64-bit word per cell index, unique to (seed, purpose, frame)."""
    # 1-element arrays, not numpy scalars: array uint64 arithmetic wraps
    # silently where the scalar path would warn
    h = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    h = _mix64(h ^ (np.array([purpose], dtype=np.uint64) * _P_PURPOSE))
    h = _mix64(h ^ (np.array([frame], dtype=np.uint64) * _P_FRAME))
    cells = np.asarray(cells, dtype=np.uint64)
    return _mix64(h ^ (cells * _P_CELL)).reshape(np.shape(cells))


def _uniform01(words: np.ndarray) -> np.ndarray:
    # strictly inside (0, 1) so the normal inverse CDF stays finite
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _uniform_int(words: np.ndarray, lo: int, hi: int) -> np.ndarray:
    span = np.uint64(hi - lo + 1)
    return lo + (words % span).astype(np.int64)


# ---------------------------------------------------------------------------
# scene description

@dataclass(frozen=True)
class Occluder:
    """A rectangle painted over the background while active.

    rect gives (x, y, w, h) at the first active frame; color_mode is
    ("fixed", color) or ("flicker", lo, hi); active is an inclusive frame
    interval; velocity moves the rectangle per frame, clamped so it stays
    inside the image.
    """

    rect: tuple
    color_mode: tuple
    active: tuple
    velocity: tuple = (0.0, 0.0)

    def position(self, t: int, width: int, height: int) -> tuple[int, int]:
        x0, y0, w, h = self.rect
        a = self.active[0]
        x = math.floor(x0 + self.velocity[0] * (t - a) + 0.5)
        y = math.floor(y0 + self.velocity[1] * (t - a) + 0.5)
        return min(max(x, 0), width - w), min(max(y, 0), height - h)


@dataclass(frozen=True)
class SceneScript:
    """A complete recipe for a synthetic sequence.

    background is ("flat", color), ("gradient",) or ("texture",).  Occluders
    paint in list order (later entries over earlier ones).  noise_sigma adds
    rounded, clamped Gaussian noise to every frame sample.
    """

    width: int
    height: int
    frames: int
    seed: int
    background: tuple = ("gradient",)
    occluders: tuple = ()
    noise_sigma: float = 0.0
    channels: int = 3

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene must be at least 1x1")
        if self.frames < 1:
            raise ValueError("scene needs at least one frame")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        object.__setattr__(self, "occluders", tuple(self.occluders))
        for i, occ in enumerate(self.occluders):
            a, b = occ.active
            if not (0 <= a <= b < self.frames):
                raise ValueError(f"occluder {i}: active interval {occ.active} outside "
                                 f"[0, {self.frames - 1}]")
            x, y, w, h = occ.rect
            if w < 1 or h < 1 or x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                raise ValueError(f"occluder {i}: rect {occ.rect} not inside the image")


# ---------------------------------------------------------------------------
# rendering

def _ramp(n: int, idx: np.ndarray) -> np.ndarray:
    """Exact integer ramp 0..255 across n positions (constant 0 for n=1)."""
    if n == 1:
        return np.zeros_like(idx)
    return (510 * idx + (n - 1)) // (2 * (n - 1))


def _render_background(script: SceneScript) -> np.ndarray:
    h, w, c = script.height, script.width, script.channels
    kind = script.background[0]
    if kind == "flat":
        color = _as_color(script.background[1], c)
        img = np.empty((h, w, c), np.uint8)
        img[:] = color
    elif kind == "gradient":
        xs = _ramp(w, np.arange(w))[None, :]
        ys = _ramp(h, np.arange(h))[:, None]
        diag = _ramp(w + h - 1, np.arange(w)[None, :] + np.arange(h)[:, None])
        if c == 1:
            img = diag.astype(np.uint8)[..., None].copy()
        else:
            img = np.stack([np.broadcast_to(xs, (h, w)),
                            np.broadcast_to(ys, (h, w)),
                            diag], axis=-1).astype(np.uint8)
    elif kind == "texture":
        cells = np.arange(h * w * c, dtype=np.uint64)
        vals = _uniform_int(_stream(script.seed, PURPOSE_TEXTURE, 0, cells), 0, 255)
        img = vals.astype(np.uint8).reshape(h, w, c)
    else:
        raise ValueError(f"unknown background kind {kind!r}")
    return img


def _as_color(value, channels: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=np.int64))
    if arr.size == 1:
        arr = np.repeat(arr, channels)
    if arr.size != channels:
        raise ValueError(f"color {value!r} does not fit {channels} channel(s)")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError(f"color {value!r} outside [0, 255]")
    return arr.astype(np.uint8)


def generate(script: SceneScript, name: str = "synthetic"):
    """Render the script into (sequence, true background).

    Frame t is the background, overpainted by each active occluder at its
    frame-t position, plus optional Gaussian noise.  The returned background
    is noise- and occluder-free.
    """
    h, w, c = script.height, script.width, script.channels
    background = _render_background(script)
    frames = np.empty((script.frames, h, w, c), np.uint8)
    pixel_ids = np.arange(h * w, dtype=np.uint64).reshape(h, w)
    for t in range(script.frames):
        frame = background.copy()
        for i, occ in enumerate(script.occluders):
            a, b = occ.active
            if not a <= t <= b:
                continue
            x, y = occ.position(t, w, h)
            ow, oh = occ.rect[2], occ.rect[3]
            if occ.color_mode[0] == "fixed":
                frame[y:y + oh, x:x + ow] = _as_color(occ.color_mode[1], c)
            elif occ.color_mode[0] == "flicker":
                lo, hi = occ.color_mode[1], occ.color_mode[2]
                words = _stream(script.seed, PURPOSE_FLICKER + i, t,
                                pixel_ids[y:y + oh, x:x + ow])
                gray = _uniform_int(words, lo, hi).astype(np.uint8)
                frame[y:y + oh, x:x + ow] = gray[..., None]
            else:
                raise ValueError(f"unknown color mode {occ.color_mode[0]!r}")
        if script.noise_sigma > 0:
            cells = np.arange(h * w * c, dtype=np.uint64)
            u = _uniform01(_stream(script.seed, PURPOSE_NOISE, t, cells))
            bump = np.rint(script.noise_sigma * ndtri(u)).astype(np.int16)
            noisy = frame.astype(np.int16) + bump.reshape(h, w, c)
            frame = np.clip(noisy, 0, 255).astype(np.uint8)
        frames[t] = frame
    if c == 1:
        frames = frames[..., 0]
        background = background[..., 0]
    return BootstrapSequence(name=name, frames=frames), background


def occupancy_map(script: SceneScript) -> np.ndarray:
    """Exact per-pixel fraction of frames covered by any occluder, computed
    from the script geometry without rendering."""
    covered = np.zeros((script.height, script.width), np.int64)
    frame_mask = np.empty((script.height, script.width), np.bool_)
    for t in range(script.frames):
        frame_mask[:] = False
        for occ in script.occluders:
            a, b = occ.active
            if a <= t <= b:
                x, y = occ.position(t, script.width, script.height)
                frame_mask[y:y + occ.rect[3], x:x + occ.rect[2]] = True
        covered += frame_mask
    return covered / script.frames


# ---------------------------------------------------------------------------
# script files (same block text format as manifests)

_SCENE_KEYS = {"width", "height", "frames", "seed", "background", "noise_sigma", "channels"}
_OCCLUDER_KEYS = {"rect", "color", "active", "velocity"}


def _parse_ints(text: str, n: int | None = None) -> tuple:
    parts = tuple(int(p.strip()) for p in text.split(","))
    if n is not None and len(parts) != n:
        raise ManifestError(f"expected {n} comma-separated integers, got {text!r}")
    return parts


def _parse_tagged(text: str) -> tuple:
    tag, _, rest = text.partition(":")
    tag = tag.strip()
    if tag in ("gradient", "texture"):
        if rest.strip():
            raise ManifestError(f"{tag} takes no arguments, got {text!r}")
        return (tag,)
    if tag == "flat" or tag == "fixed":
        return (tag, _parse_ints(rest))
    if tag == "flicker":
        lo, hi = _parse_ints(rest, 2)
        return (tag, lo, hi)
    raise ManifestError(f"unknown tagged value {text!r}")


def load_scene_script(path) -> SceneScript:
    """Read a scene script file: one [scene] block followed by any number of
    [occluder] blocks."""
    from pathlib import Path

    path = Path(path)
    blocks = parse_blocks(path.read_text(encoding="utf-8"), source=str(path))
    if not blocks or blocks[0][0] != "scene":
        raise ManifestError(f"{path}: script must start with a [scene] block")
    scene_kv = blocks[0][1]
    unknown = set(scene_kv) - _SCENE_KEYS
    if unknown:
        raise ManifestError(f"{path}: unknown keys {sorted(unknown)} in [scene]")
    occluders = []
    for header, kv in blocks[1:]:
        if header != "occluder":
            raise ManifestError(f"{path}: unknown block [{header}]")
        unknown = set(kv) - _OCCLUDER_KEYS
        if unknown:
            raise ManifestError(f"{path}: unknown keys {sorted(unknown)} in [occluder]")
        for needed in ("rect", "color", "active"):
            if needed not in kv:
                raise ManifestError(f"{path}: [occluder] missing key {needed!r}")
        velocity = (0.0, 0.0)
        if "velocity" in kv:
            vx, vy = (float(p.strip()) for p in kv["velocity"].split(","))
            velocity = (vx, vy)
        occluders.append(Occluder(
            rect=_parse_ints(kv["rect"], 4),
            color_mode=_parse_tagged(kv["color"]),
            active=_parse_ints(kv["active"], 2),
            velocity=velocity,
        ))
    try:
        return SceneScript(
            width=int(scene_kv["width"]),
            height=int(scene_kv["height"]),
            frames=int(scene_kv["frames"]),
            seed=int(scene_kv["seed"]),
            background=_parse_tagged(scene_kv.get("background", "gradient")),
            occluders=tuple(occluders),
            noise_sigma=float(scene_kv.get("noise_sigma", "0")),
            channels=int(scene_kv.get("channels", "3")),
        )
    except KeyError as missing:
        raise ManifestError(f"{path}: [scene] missing key {missing}") from None


def _format_tagged(value: tuple) -> str:
    tag = value[0]
    if tag in ("gradient", "texture"):
        return tag
    if tag in ("flat", "fixed"):
        color = value[1]
        parts = color if isinstance(color, (tuple, list, np.ndarray)) else (color,)
        return f"{tag}:" + ",".join(str(int(p)) for p in parts)
    if tag == "flicker":
        return f"flicker:{int(value[1])},{int(value[2])}"
    raise ValueError(f"unknown tagged value {value!r}")


def format_scene_script(script: SceneScript) -> str:
    """Serialize a script back into the block text format."""
    lines = [
        "[scene]",
        f"width = {script.width}",
        f"height = {script.height}",
        f"frames = {script.frames}",
        f"seed = {script.seed}",
        f"background = {_format_tagged(script.background)}",
        f"noise_sigma = {script.noise_sigma:g}",
        f"channels = {script.channels}",
    ]
    for occ in script.occluders:
        lines += [
            "",
            "[occluder]",
            "rect = " + ",".join(str(v) for v in occ.rect),
            f"color = {_format_tagged(occ.color_mode)}",
            f"active = {occ.active[0]},{occ.active[1]}",
            f"velocity = {occ.velocity[0]:g},{occ.velocity[1]:g}",
        ]
    return "\n".join(lines) + "\n"
