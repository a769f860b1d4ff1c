"""Background estimation methods.

Each method maps a bootstrap sequence to a single background image of the
same shape.  All four are deterministic: tie-breaks go to the earliest
frame / lowest index / row-major block order, and per-pixel work never
depends on the visiting order of other pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from . import _kernels
from .seqio import BootstrapSequence, validate_image


@dataclass(frozen=True)
class WS2006Params:
    """Stable-subsequence estimator knobs: eps_stable bounds the deviation
    of a sample from its run's running mean, min_len is the shortest
    usable run, delta_consensus is the inlier threshold for scoring."""

    eps_stable: float = 10.0
    min_len: int = 10
    delta_consensus: float = 10.0

    def __post_init__(self):
        if self.eps_stable <= 0 or self.delta_consensus <= 0:
            raise ValueError("thresholds must be positive")
        if self.min_len < 2:
            raise ValueError("min_len must be at least 2")


@dataclass(frozen=True)
class SobsParams:
    """Self-organizing model knobs: n slots per patch side (n*n per pixel),
    eps_match for selective updates, alpha0/alpha1 the linearly decaying
    learning rate, epochs the number of training passes."""

    n: int = 3
    eps_match: float = 20.0
    alpha0: float = 1.0
    alpha1: float = 0.05
    epochs: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("model side n must be at least 1")
        if not 0.0 < self.alpha1 <= self.alpha0 <= 1.0:
            raise ValueError("need 0 < alpha1 <= alpha0 <= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass(frozen=True)
class BlockMrfParams:
    """Block completion knobs: block side length (must divide both image
    dimensions), cand_thresh for merging temporal blocks into one
    representative, stable_frac the support fraction that seeds a block,
    max_sweeps the cap on re-optimization passes."""

    block: int = 8
    cand_thresh: float = 15.0
    stable_frac: float = 0.8
    max_sweeps: int = 10

    def __post_init__(self):
        if self.block < 1:
            raise ValueError("block side must be at least 1")
        if not 0.0 < self.stable_frac <= 1.0:
            raise ValueError("stable_frac must lie in (0, 1]")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be non-negative")


def params_with_overrides(params, overrides: dict):
    """Apply string-valued overrides to a params dataclass, coercing each
    value to the field's type."""
    kwargs = {}
    by_name = {f.name: f for f in fields(params)}
    for key, raw in overrides.items():
        if key not in by_name:
            raise ValueError(f"unknown parameter {key!r} for {type(params).__name__}")
        caster = int if by_name[key].type in ("int", int) else float
        kwargs[key] = caster(raw)
    return replace(params, **kwargs)


# ---------------------------------------------------------------------------
# shared plumbing

def _frames_of(seq) -> np.ndarray:
    if isinstance(seq, BootstrapSequence):
        return seq.frames
    frames = np.asarray(seq)
    BootstrapSequence(name="anonymous", frames=frames)  # reuse the validation
    return frames


def _flat_view(frames: np.ndarray):
    """(T, H, W[, C]) -> contiguous (T, N, C) plus the original image shape."""
    t = frames.shape[0]
    shape = frames.shape[1:]
    if frames.ndim == 3:
        flat = frames.reshape(t, -1, 1)
    else:
        flat = frames.reshape(t, -1, frames.shape[3])
    return np.ascontiguousarray(flat), shape


def _unflatten(flat_pixels: np.ndarray, shape) -> np.ndarray:
    return flat_pixels.reshape(shape).astype(np.uint8, copy=False)


# ---------------------------------------------------------------------------
# temporal medoid

def median_background(seq) -> np.ndarray:
    """Per-pixel temporal medoid: the observed value minimizing the sum of
    channel-wise max-abs distances to all other observations of that pixel
    (ties: earliest frame)."""
    frames = _frames_of(seq)
    flat, shape = _flat_view(frames)
    idx = _kernels.medoid_select(flat)
    picked = flat[idx, np.arange(flat.shape[1])]
    return _unflatten(picked, shape)


# ---------------------------------------------------------------------------
# stable-subsequence consensus

def ws2006_background(seq, params: WS2006Params | None = None) -> np.ndarray:
    """Pixel-wise longest-stable-value estimate.

    Greedily partitions each pixel's temporal line into runs of mutually
    similar values, keeps runs of at least min_len frames, scores each by
    whole-sequence consensus, and outputs the rounded mean of the winner.
    Sequences shorter than min_len fall back to the medoid, as do pixels
    with no surviving run.
    """
    params = params or WS2006Params()
    frames = _frames_of(seq)
    if frames.shape[0] < params.min_len:
        return median_background(seq)
    flat, shape = _flat_view(frames)
    out = _kernels.ws2006_select(flat, float(params.eps_stable),
                                 int(params.min_len), float(params.delta_consensus))
    return _unflatten(out, shape)


# ---------------------------------------------------------------------------
# self-organizing model

def _neighborhood_factors(n: int) -> np.ndarray:
    """Gaussian coupling between the n*n model slots of a pixel, by their
    patch-grid distance (sigma = n/2)."""
    pos = np.stack(np.divmod(np.arange(n * n), n), axis=1).astype(np.float64)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
    sigma = n / 2.0
    return np.exp(-d2 / (2.0 * sigma * sigma))


def sobs_background(seq, params: SobsParams | None = None,
                    extraction: str = "frequency", gt=None) -> np.ndarray:
    """Background from a per-pixel self-organizing model.

    Trains n*n weight slots per pixel with a selective, neighborhood-coupled
    update over the sequence, then extracts one slot per pixel:

    - "frequency": the slot matched most often (ties: lowest slot index);
    - "oracle": the slot closest to the supplied reference image `gt`
      (comparison use only, since it peeks at the reference).
    """
    params = params or SobsParams()
    if extraction not in ("frequency", "oracle"):
        raise ValueError(f"unknown extraction mode {extraction!r}")
    frames = _frames_of(seq)
    flat, shape = _flat_view(frames)
    n_pixels = flat.shape[1]
    gauss = _neighborhood_factors(params.n)
    weights, counts = _kernels.sobs_train(
        flat, params.n * params.n, float(params.eps_match),
        float(params.alpha0), float(params.alpha1), int(params.epochs), gauss)
    if extraction == "oracle":
        if gt is None:
            raise ValueError("oracle extraction needs the reference image")
        gt = validate_image(gt)
        if gt.shape != shape:
            raise ValueError(f"reference shape {gt.shape} does not match frames {shape}")
        target = gt.reshape(n_pixels, 1, -1).astype(np.float64)
        dist = np.abs(weights - target).max(axis=2)
        picked = dist.argmin(axis=1)
    else:
        picked = counts.argmax(axis=1)
    chosen = weights[np.arange(n_pixels), picked]
    out = np.clip(np.floor(chosen + 0.5), 0, 255)
    return _unflatten(out, shape)


# ---------------------------------------------------------------------------
# block-wise completion with seam-energy smoothing

def _block_series(frames: np.ndarray, block: int):
    """(T, H, W, C) -> (T, By, Bx, block, block, C)."""
    t, h, w, c = frames.shape
    by, bx = h // block, w // block
    arr = frames.reshape(t, by, block, bx, block, c)
    return arr.transpose(0, 1, 3, 2, 4, 5), by, bx


def _cluster_blocks(series: np.ndarray, thresh: float):
    """Greedy temporal clustering of one block location.

    A frame's block joins the best-matching representative when the mean
    absolute difference is within thresh, else becomes a new representative.
    The representative keeps the pixel data of its first member.
    """
    t = series.shape[0]
    reps = np.empty((t,) + series.shape[1:], np.int16)
    support = np.zeros(t, np.int64)
    count = 0
    for i in range(t):
        blk = series[i].astype(np.int16)
        if count:
            mad = np.abs(reps[:count] - blk).mean(axis=(1, 2, 3))
            best = int(mad.argmin())
            if mad[best] <= thresh:
                support[best] += 1
                continue
        reps[count] = blk
        support[count] = 1
        count += 1
    return reps[:count], support[:count]


def _seam(edge_a: np.ndarray, edge_b: np.ndarray) -> float:
    d = edge_a.astype(np.float64) - edge_b.astype(np.float64)
    return float(np.mean(d * d))


_NEIGHBOR_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _boundary_energy(rep_a, rep_b, side: str) -> float:
    """Mean squared gradient across the one-pixel band where block A meets
    block B (side names which edge of A faces B)."""
    if side == "up":
        return _seam(rep_a[0, :, :], rep_b[-1, :, :])
    if side == "down":
        return _seam(rep_a[-1, :, :], rep_b[0, :, :])
    if side == "left":
        return _seam(rep_a[:, 0, :], rep_b[:, -1, :])
    return _seam(rep_a[:, -1, :], rep_b[:, 0, :])


_SIDES = {(-1, 0): "up", (1, 0): "down", (0, -1): "left", (0, 1): "right"}


def _candidate_energy(reps, r, by, bx, assigned, chosen, all_reps):
    total = 0.0
    for dy, dx in _NEIGHBOR_STEPS:
        ny, nx = by + dy, bx + dx
        if 0 <= ny < assigned.shape[0] and 0 <= nx < assigned.shape[1] and assigned[ny, nx]:
            nb_rep = all_reps[ny][nx][0][chosen[ny, nx]]
            total += _boundary_energy(reps[r], nb_rep, _SIDES[(dy, dx)])
    return total


def blockmrf_background(seq, params: BlockMrfParams | None = None,
                        full_output: bool = False):
    """Block-level background completion.

    Per block location, the temporal line is clustered into representative
    blocks with support counts.  Blocks whose top representative covers at
    least stable_frac of the frames are assigned immediately; the remainder
    are filled in most-constrained-first, choosing the representative with
    the lowest seam energy against already-assigned neighbors.  Finally up
    to max_sweeps of conditional re-optimization re-choose each block in
    row-major order, which never increases the total seam energy.

    With full_output=True, returns (image, info) where info carries
    "seam_energies" (total after completion and after each sweep),
    "sweeps" and "seeded" counts.
    """
    params = params or BlockMrfParams()
    frames = _frames_of(seq)
    if frames.ndim == 3:
        frames = frames[..., None]
        squeeze = True
    else:
        squeeze = False
    t, h, w, c = frames.shape
    if h % params.block or w % params.block:
        raise ValueError(f"block side {params.block} must divide image size {h}x{w}")
    series, n_by, n_bx = _block_series(frames, params.block)

    table = [[_cluster_blocks(series[:, by, bx], params.cand_thresh)
              for bx in range(n_bx)] for by in range(n_by)]
    chosen = np.zeros((n_by, n_bx), np.int64)
    assigned = np.zeros((n_by, n_bx), np.bool_)

    # seeding: dominant representative covers enough of the sequence
    need = params.stable_frac * t
    for by in range(n_by):
        for bx in range(n_bx):
            support = table[by][bx][1]
            top = int(support.argmax())
            if support[top] >= need:
                chosen[by, bx] = top
                assigned[by, bx] = True
    seeded = int(assigned.sum())

    # completion: most assigned neighbors first, row-major ties
    while not assigned.all():
        best_pos = None
        best_nbrs = -1
        for by in range(n_by):
            for bx in range(n_bx):
                if assigned[by, bx]:
                    continue
                nbrs = sum(
                    1 for dy, dx in _NEIGHBOR_STEPS
                    if 0 <= by + dy < n_by and 0 <= bx + dx < n_bx
                    and assigned[by + dy, bx + dx])
                if nbrs > best_nbrs:
                    best_nbrs = nbrs
                    best_pos = (by, bx)
        by, bx = best_pos
        reps = table[by][bx][0]
        energies = [_candidate_energy(reps, r, by, bx, assigned, chosen, table)
                    for r in range(len(reps))]
        chosen[by, bx] = int(np.argmin(energies))
        assigned[by, bx] = True

    def total_energy():
        total = 0.0
        for by in range(n_by):
            for bx in range(n_bx):
                rep = table[by][bx][0][chosen[by, bx]]
                if by + 1 < n_by:
                    total += _boundary_energy(rep, table[by + 1][bx][0][chosen[by + 1, bx]], "down")
                if bx + 1 < n_bx:
                    total += _boundary_energy(rep, table[by][bx + 1][0][chosen[by, bx + 1]], "right")
        return total

    energies_per_sweep = [total_energy()]
    sweeps = 0
    for _ in range(params.max_sweeps):
        changed = False
        for by in range(n_by):
            for bx in range(n_bx):
                reps = table[by][bx][0]
                if len(reps) == 1:
                    continue
                energies = [_candidate_energy(reps, r, by, bx, assigned, chosen, table)
                            for r in range(len(reps))]
                pick = int(np.argmin(energies))
                if pick != chosen[by, bx]:
                    chosen[by, bx] = pick
                    changed = True
        sweeps += 1
        energies_per_sweep.append(total_energy())
        if not changed:
            break

    out = np.empty((h, w, c), np.uint8)
    b = params.block
    for by in range(n_by):
        for bx in range(n_bx):
            rep = table[by][bx][0][chosen[by, bx]]
            out[by * b:(by + 1) * b, bx * b:(bx + 1) * b] = rep.astype(np.uint8)
    if squeeze:
        out = out[..., 0]
    if full_output:
        return out, {"seam_energies": energies_per_sweep, "sweeps": sweeps, "seeded": seeded}
    return out
