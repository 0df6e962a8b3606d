"""Temporal alignment of a learner recording against an expert reference.

Two-stage window search: the best start index is chosen with a window of the
reference's length, then the best window length is chosen from that start.
DTW uses the symmetric step set {(1,0), (0,1), (1,1)} and the Euclidean norm
of the 72 wrapped rotation differences as the per-frame cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import N_FEATURES, MotionSequence
from .errors import InvalidInputError, LearnerTooShortError

DEFAULT_FAST_RADIUS = 10
_ROW_CHUNK = 64


@dataclass(frozen=True)
class AlignmentResult:
    start_index: int
    window_length: int
    distance: float
    path: tuple[tuple[int, int], ...]

    def to_record(self) -> dict:
        return {
            "start_index": self.start_index,
            "window_length": self.window_length,
            "distance": self.distance,
            "path": [list(p) for p in self.path],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AlignmentResult":
        return cls(
            int(rec["start_index"]),
            int(rec["window_length"]),
            float(rec["distance"]),
            tuple((int(a), int(b)) for a, b in rec["path"]),
        )


def _flat(seq_or_array) -> np.ndarray:
    arr = seq_or_array.rotations if isinstance(seq_or_array, MotionSequence) else seq_or_array
    arr = np.asarray(arr, dtype=float)
    return np.ascontiguousarray(arr.reshape(arr.shape[0], N_FEATURES))


def _wrapped(d: np.ndarray) -> np.ndarray:
    # operands already lie in (-180, 180], so one shift suffices
    return np.where(d > 180.0, d - 360.0, np.where(d <= -180.0, d + 360.0, d))


def cost_matrix(user, ref) -> np.ndarray:
    """Pairwise frame distances, shape (len(user), len(ref))."""
    u = _flat(user)
    r = _flat(ref)
    out = np.empty((u.shape[0], r.shape[0]))
    for lo in range(0, u.shape[0], _ROW_CHUNK):
        d = _wrapped(u[lo:lo + _ROW_CHUNK, None, :] - r[None, :, :])
        out[lo:lo + _ROW_CHUNK] = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    return out


def frame_distance(a, b) -> float:
    """Euclidean norm of the wrapped differences between two (24, 3) frames."""
    fa = np.asarray(a, dtype=float).reshape(1, N_FEATURES)
    fb = np.asarray(b, dtype=float).reshape(1, N_FEATURES)
    return float(cost_matrix(fa, fb)[0, 0])


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True, nogil=True)
def _accumulate(c):
    n, m = c.shape
    d = np.empty((n, m))
    d[0, 0] = c[0, 0]
    for j in range(1, m):
        d[0, j] = c[0, j] + d[0, j - 1]
    for i in range(1, n):
        d[i, 0] = c[i, 0] + d[i - 1, 0]
        for j in range(1, m):
            best = d[i - 1, j - 1]
            if d[i - 1, j] < best:
                best = d[i - 1, j]
            if d[i, j - 1] < best:
                best = d[i, j - 1]
            d[i, j] = c[i, j] + best
    return d


@nb.njit(cache=True, nogil=True)
def _traceback(d):
    n, m = d.shape
    i = n - 1
    j = m - 1
    out = np.empty((n + m - 1, 2), dtype=np.int64)
    k = 0
    out[k, 0] = i
    out[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = d[i - 1, j - 1]
            up = d[i - 1, j]
            left = d[i, j - 1]
            # ties prefer the diagonal, then the learner step
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        out[k, 0] = i
        out[k, 1] = j
    return out[: k + 1][::-1].copy()


@nb.njit(cache=True, nogil=True)
def _window_distances(c, length):
    """DTW distance of c[t:t+length, :] for every start t."""
    n, m = c.shape
    n_windows = n - length + 1
    out = np.empty(n_windows)
    prev = np.empty(m)
    cur = np.empty(m)
    for t in range(n_windows):
        prev[0] = c[t, 0]
        for j in range(1, m):
            prev[j] = c[t, j] + prev[j - 1]
        for i in range(1, length):
            row = t + i
            cur[0] = c[row, 0] + prev[0]
            for j in range(1, m):
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = c[row, j] + best
            for j in range(m):
                prev[j] = cur[j]
        out[t] = prev[m - 1]
    return out


@nb.njit(cache=True, nogil=True)
def _banded_accumulate(u, r, lo, hi):
    """DTW restricted to cells lo[i] <= j <= hi[i]; costs computed on demand."""
    n = u.shape[0]
    m = r.shape[0]
    f = u.shape[1]
    d = np.full((n, m), np.inf)
    for i in range(n):
        for j in range(lo[i], hi[i] + 1):
            s = 0.0
            for k in range(f):
                x = u[i, k] - r[j, k]
                if x > 180.0:
                    x -= 360.0
                elif x <= -180.0:
                    x += 360.0
                s += x * x
            cost = math.sqrt(s)
            if i == 0 and j == 0:
                d[i, j] = cost
                continue
            best = np.inf
            if i > 0 and j > 0 and d[i - 1, j - 1] < best:
                best = d[i - 1, j - 1]
            if i > 0 and d[i - 1, j] < best:
                best = d[i - 1, j]
            if j > 0 and d[i, j - 1] < best:
                best = d[i, j - 1]
            d[i, j] = cost + best
    return d


# ---------------------------------------------------------------- DTW


def _exact(u: np.ndarray, r: np.ndarray):
    d = _accumulate(cost_matrix(u, r))
    return float(d[-1, -1]), _traceback(d)


def _halve(x: np.ndarray) -> np.ndarray:
    n = x.shape[0] // 2
    a = x[0 : 2 * n : 2]
    b = x[1 : 2 * n : 2]
    return _wrapped(a + _wrapped(b - a) / 2.0)


def _expand_window(path: np.ndarray, n: int, m: int, radius: int):
    n_low = int(path[:, 0].max()) + 1
    pmin = np.full(n_low, np.iinfo(np.int64).max, dtype=np.int64)
    pmax = np.full(n_low, -1, dtype=np.int64)
    np.minimum.at(pmin, path[:, 0], path[:, 1])
    np.maximum.at(pmax, path[:, 0], path[:, 1])
    lo_low = np.empty(n_low, dtype=np.int64)
    hi_low = np.empty(n_low, dtype=np.int64)
    for i in range(n_low):
        a, b = max(0, i - radius), min(n_low, i + radius + 1)
        lo_low[i] = pmin[a:b].min() - radius
        hi_low[i] = pmax[a:b].max() + radius
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    for i in range(n):
        k = min(i // 2, n_low - 1)
        lo[i] = max(0, 2 * lo_low[k])
        hi[i] = min(m - 1, 2 * hi_low[k] + 1)
    lo[0] = 0
    hi[-1] = m - 1
    for i in range(1, n):
        # keep consecutive rows connected
        lo[i] = min(lo[i], hi[i - 1] + 1)
        hi[i] = max(hi[i], lo[i])
    for i in range(n - 2, -1, -1):
        hi[i] = max(hi[i], lo[i + 1] - 1)
    return lo, hi


def _fast(u: np.ndarray, r: np.ndarray, radius: int):
    min_size = radius + 2
    if u.shape[0] < min_size or r.shape[0] < min_size:
        return _exact(u, r)
    _, low_path = _fast(_halve(u), _halve(r), radius)
    lo, hi = _expand_window(low_path, u.shape[0], r.shape[0], radius)
    d = _banded_accumulate(u, r, lo, hi)
    return float(d[-1, -1]), _traceback(d)


def _check_radius(radius):
    if radius is not None and (int(radius) != radius or radius < 0):
        raise InvalidInputError(f"fast radius must be a nonnegative integer, got {radius}")


def dtw(
    user: MotionSequence,
    ref: MotionSequence,
    start: int = 0,
    length: int | None = None,
    radius: int | None = None,
) -> AlignmentResult:
    """DTW between ``user[start:start+length]`` and the full reference.

    ``radius`` switches to the FastDTW approximation with that radius.
    Path indices are absolute learner frame indices.
    """
    _check_radius(radius)
    u_all = _flat(user)
    r = _flat(ref)
    if length is None:
        length = u_all.shape[0] - start
    if length <= 0 or r.shape[0] == 0 or start < 0 or start + length > u_all.shape[0]:
        raise InvalidInputError("dtw needs non-empty, in-range frame windows")
    u = u_all[start : start + length]
    if radius is None:
        dist, path = _exact(u, r)
    else:
        dist, path = _fast(u, r, int(radius))
    pairs = tuple((int(i) + start, int(j)) for i, j in path)
    return AlignmentResult(start, length, dist, pairs)


def window_distances(user: MotionSequence, ref: MotionSequence, radius: int | None = None) -> np.ndarray:
    """DTW distance for every reference-length window start in the learner sequence."""
    _check_radius(radius)
    u = _flat(user)
    r = _flat(ref)
    L_i = r.shape[0]
    if radius is None:
        return _window_distances(cost_matrix(u, r), L_i)
    return np.array([_fast(u[t : t + L_i], r, int(radius))[0] for t in range(u.shape[0] - L_i + 1)])


def length_distances(
    user: MotionSequence, ref: MotionSequence, t_star: int, radius: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(lengths, distances) over the closed range [ceil(L_i / 2), L_u - t*]."""
    _check_radius(radius)
    u = _flat(user)
    r = _flat(ref)
    L_u, L_i = u.shape[0], r.shape[0]
    if not 0 <= t_star < L_u:
        raise InvalidInputError(f"start index {t_star} outside learner sequence")
    lo = math.ceil(0.5 * L_i)
    hi = L_u - t_star
    if lo < 1 or hi < lo:
        raise LearnerTooShortError(
            f"no window length in [{lo}, {hi}] fits after start index {t_star}"
        )
    lengths = np.arange(lo, hi + 1)
    if radius is None:
        # rows of one accumulation depend only on earlier rows, so the last
        # column gives every window length at once
        d = _accumulate(cost_matrix(u[t_star:], r))
        dists = d[lengths - 1, -1].copy()
    else:
        dists = np.array([_fast(u[t_star : t_star + L], r, int(radius))[0] for L in lengths])
    return lengths, dists


def find_start(user: MotionSequence, ref: MotionSequence, radius: int | None = None) -> int:
    L_u, L_i = len(user), len(ref)
    if L_i == 0 or L_u < L_i:
        raise LearnerTooShortError(f"learner has {L_u} frames, reference needs {L_i}")
    dists = window_distances(user, ref, radius)
    # argmin returns the first minimum: smallest t wins ties
    return int(np.argmin(dists))


def _pick_length(lengths: np.ndarray, dists: np.ndarray, native: int) -> int:
    best = dists.min()
    tied = lengths[dists == best]
    gap = np.abs(tied - native)
    return int(tied[gap == gap.min()].min())


def find_length(user: MotionSequence, ref: MotionSequence, t_star: int, radius: int | None = None) -> int:
    lengths, dists = length_distances(user, ref, t_star, radius)
    return _pick_length(lengths, dists, len(ref))


def align(user: MotionSequence, ref: MotionSequence, radius: int | None = None) -> AlignmentResult:
    """Find the performed window (t*, L_w*) and return its DTW alignment."""
    t_star = find_start(user, ref, radius)
    length = find_length(user, ref, t_star, radius)
    return dtw(user, ref, start=t_star, length=length, radius=radius)
