"""Compiled per-pixel temporal kernels.

Each kernel is parallel over pixels only; all per-pixel work is sequential
integer/float arithmetic in a fixed order, so results are bit-identical at
any thread count.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def medoid_select(frames):
    """Per-pixel medoid frame index under the channel-wise max-abs distance.

    frames: (T, N, C) uint8.  Returns (N,) int64 of frame indices; ties go
    to the earliest frame.
    """
    T, N, C = frames.shape
    out = np.empty(N, np.int64)
    for p in prange(N):
        cost = np.zeros(T, np.int64)
        for t in range(T):
            for s in range(t + 1, T):
                m = np.int64(0)
                for c in range(C):
                    # uint8 arithmetic wraps; cast to signed before subtracting
                    d = np.int64(frames[t, p, c]) - np.int64(frames[s, p, c])
                    if d < 0:
                        d = -d
                    if d > m:
                        m = d
                cost[t] += m
                cost[s] += m
        best = 0
        for t in range(1, T):
            if cost[t] < cost[best]:
                best = t
        out[p] = best
    return out


@njit(cache=True)
def _pixel_medoid(frames, p):
    T, C = frames.shape[0], frames.shape[2]
    best = 0
    best_cost = np.int64(0)
    for t in range(T):
        cost = np.int64(0)
        for s in range(T):
            m = np.int64(0)
            for c in range(C):
                d = np.int64(frames[t, p, c]) - np.int64(frames[s, p, c])
                if d < 0:
                    d = -d
                if d > m:
                    m = d
            cost += m
        if t == 0 or cost < best_cost:
            best_cost = cost
            best = t
    return best


@njit(cache=True, parallel=True)
def ws2006_select(frames, eps_stable, min_len, delta):
    """Stable-subsequence consensus estimate per pixel.

    Greedy temporal segmentation (extend while within eps_stable of the
    running mean), drop runs shorter than min_len, score survivors by how
    many whole-sequence samples fall within delta of the run mean, pick the
    best (ties: longer run, then earlier start) and output its rounded
    mean.  Pixels with no surviving run fall back to their medoid.
    """
    T, N, C = frames.shape
    out = np.empty((N, C), np.uint8)
    for p in prange(N):
        run_start = np.empty(T, np.int64)
        run_len = np.zeros(T, np.int64)
        run_sum = np.zeros((T, C), np.float64)
        n_runs = 1
        run_start[0] = 0
        run_len[0] = 1
        for c in range(C):
            run_sum[0, c] = frames[0, p, c]
        for t in range(1, T):
            cur = n_runs - 1
            dev = 0.0
            for c in range(C):
                d = abs(frames[t, p, c] - run_sum[cur, c] / run_len[cur])
                if d > dev:
                    dev = d
            if dev <= eps_stable:
                run_len[cur] += 1
                for c in range(C):
                    run_sum[cur, c] += frames[t, p, c]
            else:
                n_runs += 1
                run_start[n_runs - 1] = t
                run_len[n_runs - 1] = 1
                for c in range(C):
                    run_sum[n_runs - 1, c] = frames[t, p, c]
        best_r = -1
        best_cons = np.int64(-1)
        best_len = np.int64(0)
        for r in range(n_runs):
            if run_len[r] < min_len:
                continue
            cons = np.int64(0)
            for t in range(T):
                m = 0.0
                for c in range(C):
                    d = abs(frames[t, p, c] - run_sum[r, c] / run_len[r])
                    if d > m:
                        m = d
                if m <= delta:
                    cons += 1
            if cons > best_cons or (cons == best_cons and run_len[r] > best_len):
                best_r = r
                best_cons = cons
                best_len = run_len[r]
        if best_r < 0:
            t = _pixel_medoid(frames, p)
            for c in range(C):
                out[p, c] = frames[t, p, c]
        else:
            for c in range(C):
                mean = run_sum[best_r, c] / run_len[best_r]
                out[p, c] = np.uint8(int(mean + 0.5))
    return out


@njit(cache=True, parallel=True)
def sobs_train(frames, n2, eps_match, alpha0, alpha1, epochs, gauss):
    """Train the per-pixel self-organizing model.

    frames: (T, N, C) uint8; gauss: (n2, n2) neighborhood factors between
    model slots.  Slot j of every pixel starts at the frame-0 value; each
    later frame updates the best-matching slot and its patch neighbors when
    the match distance is within eps_match, with the learning rate decaying
    linearly from alpha0 to alpha1 over each pass.  Returns (weights,
    match_counts).
    """
    T, N, C = frames.shape
    weights = np.empty((N, n2, C), np.float64)
    counts = np.zeros((N, n2), np.int64)
    for p in prange(N):
        for j in range(n2):
            for c in range(C):
                weights[p, j, c] = frames[0, p, c]
        steps = T - 1
        for _ in range(epochs):
            for i in range(steps):
                t = 1 + i
                if steps > 1:
                    alpha = alpha0 + (alpha1 - alpha0) * (i / (steps - 1))
                else:
                    alpha = alpha0
                best = 0
                best_d = 1e300
                for j in range(n2):
                    m = 0.0
                    for c in range(C):
                        d = abs(weights[p, j, c] - frames[t, p, c])
                        if d > m:
                            m = d
                    if m < best_d:
                        best_d = m
                        best = j
                if best_d <= eps_match:
                    counts[p, best] += 1
                    for j in range(n2):
                        g = alpha * gauss[best, j]
                        for c in range(C):
                            weights[p, j, c] += g * (frames[t, p, c] - weights[p, j, c])
    return weights, counts
