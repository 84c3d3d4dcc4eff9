"""Numpy implementations of the pairwise kernels.

Used when the compiled extension is unavailable. The arithmetic order matches
``_ckernels.pyx`` (translate, subtract, accumulate squares coordinate by
coordinate) so results agree bit for bit.
"""

import numpy as np

# cap on the number of pair distances materialised at once
_CHUNK_PAIRS = 1 << 21


def _pair_sq_block(translated, obstacles):
    diff = translated[:, None, 0] - obstacles[None, :, 0]
    sq = diff * diff
    for d in range(1, translated.shape[1]):
        diff = translated[:, None, d] - obstacles[None, :, d]
        sq = sq + diff * diff
    return sq


def _row_chunk(m):
    return max(1, _CHUNK_PAIRS // max(m, 1))


def min_pair(body, obstacles, shift):
    translated = body + shift
    m = obstacles.shape[0]
    step = _row_chunk(m)
    best, bi, bj = np.inf, -1, -1
    for start in range(0, translated.shape[0], step):
        sq = _pair_sq_block(translated[start:start + step], obstacles)
        flat = int(np.argmin(sq))
        value = float(sq.flat[flat])
        if value < best:
            best = value
            bi, bj = divmod(flat, m)
            bi += start
    return best, bi, bj


def pairs_within(body, obstacles, shift, bound):
    translated = body + shift
    m = obstacles.shape[0]
    step = _row_chunk(m)
    out_i, out_j, out_sq = [], [], []
    for start in range(0, translated.shape[0], step):
        sq = _pair_sq_block(translated[start:start + step], obstacles)
        ii, jj = np.nonzero(sq <= bound)
        out_i.append(ii + start)
        out_j.append(jj)
        out_sq.append(sq[ii, jj])
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return (
        np.concatenate(out_i).astype(np.int64),
        np.concatenate(out_j).astype(np.int64),
        np.concatenate(out_sq),
    )


def nearest_sq(queries, points):
    m = points.shape[0]
    step = _row_chunk(m)
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], step):
        out[start:start + step] = _pair_sq_block(queries[start:start + step], points).min(axis=1)
    return out


def active_pairs(body, obstacles, shift, tolerance, radius, slack):
    diff = obstacles - shift
    c = np.sqrt(np.sum(diff * diff, axis=1))
    upper = (float(c.min()) + radius) ** 2 * (1.0 + slack) + tolerance
    lower = np.maximum(c - radius, 0.0) ** 2 * (1.0 - slack)
    keep = np.flatnonzero(lower <= upper)
    sub = np.ascontiguousarray(obstacles[keep])
    best, _, _ = min_pair(body, sub, shift)
    ii, jj, sq = pairs_within(body, sub, shift, best + tolerance)
    return best, ii, keep[jj].astype(np.int64), sq
