"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The active backend is chosen per call from the environment
variable ``LO_LAB_BACKEND`` ("numba" or "numpy"); the default is numba
when it is importable.  Both backends implement the same algorithm with
the same tie-breaking rules, so their outputs are identical.

Kernels here work on pre-scaled data only: integer lattice coordinates
for exact enumeration, float64 atoms for disk sweeps, float64 grids for
quadrature.  All exact-arithmetic policy lives in the calling modules.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

    prange = range

# Ends of angular cover intervals are nudged past starts by this much so a
# stable sort realizes closed-interval semantics at exact angle ties.
_END_NUDGE = 1e-12

_TWO_PI = 2.0 * math.pi


def active_backend() -> str:
    """Return "numba" or "numpy" for the current call, honoring LO_LAB_BACKEND."""
    env = os.environ.get("LO_LAB_BACKEND", "").strip().lower()
    if env == "numpy":
        return "numpy"
    if env == "numba":
        return "numba" if HAS_NUMBA else "numpy"
    return "numba" if HAS_NUMBA else "numpy"


def set_thread_cap(threads: int | None) -> None:
    """Cap numba's worker threads; no-op on the numpy backend."""
    if threads is None or not HAS_NUMBA:
        return
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)


# ---------------------------------------------------------------------------
# Gray-code enumeration of signed sums on an integer lattice
# ---------------------------------------------------------------------------
#
# Sign pattern for step index t is the reflected binary code g = t ^ (t >> 1):
# bit i of g set means vector i takes sign -1.  Consecutive codes differ in
# exactly one bit, so the running sum is updated in O(d) per step.


@njit(cache=True)
def _gray_block_njit(coords, t0, t1, out):  # pragma: no cover - compiled
    n, d = coords.shape
    s = np.zeros(d, np.int64)
    g0 = t0 ^ (t0 >> np.int64(1))
    for i in range(n):
        if (g0 >> np.int64(i)) & np.int64(1):
            for k in range(d):
                s[k] -= coords[i, k]
        else:
            for k in range(d):
                s[k] += coords[i, k]
    for k in range(d):
        out[0, k] = s[k]
    row = 1
    for t in range(t0 + 1, t1):
        j = 0
        while not (t >> j) & 1:
            j += 1
        g = t ^ (t >> np.int64(1))
        if (g >> np.int64(j)) & np.int64(1):
            for k in range(d):
                s[k] -= 2 * coords[j, k]
        else:
            for k in range(d):
                s[k] += 2 * coords[j, k]
        for k in range(d):
            out[row, k] = s[k]
        row += 1


def _gray_block_numpy(coords, t0, t1, out):
    n, d = coords.shape
    ts = np.arange(t0, t1, dtype=np.uint64)
    g = ts ^ (ts >> np.uint64(1))
    if n:
        bits = (g[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
        signs = (1 - 2 * bits.astype(np.int64))
        np.matmul(signs, coords, out=out)
    else:
        out[:] = 0


def gray_sums_block(coords: np.ndarray, t0: int, t1: int) -> np.ndarray:
    """Signed sums for Gray-code steps [t0, t1) as an (t1-t0, d) int64 array."""
    out = np.empty((t1 - t0, coords.shape[1]), np.int64)
    if active_backend() == "numba":
        _gray_block_njit(coords, np.int64(t0), np.int64(t1), out)
    else:
        _gray_block_numpy(coords, t0, t1, out)
    return out


# ---------------------------------------------------------------------------
# Deepest disk of fixed radius over weighted planar atoms
# ---------------------------------------------------------------------------
#
# Candidate centers are (a) every atom and (b) centers with two atoms on the
# boundary circle.  (b) is enumerated by the classical angular sweep: for a
# pivot atom p, centers at distance r from p form a circle; a neighbor q with
# |q-p| <= 2r is covered exactly for sweep angles in an arc of half-width
# acos(|q-p|/2r) around the direction of q.  Neighbor gathering uses a
# uniform grid of cell size 2r, so a 3x3 block covers the gather radius.


@njit(cache=True)
def _grid_index_njit(pts, cell, xmin, ymin, nx, ny):  # pragma: no cover
    A = pts.shape[0]
    counts = np.zeros(nx * ny, np.int64)
    cells = np.empty(A, np.int64)
    for i in range(A):
        ix = np.int64((pts[i, 0] - xmin) / cell)
        iy = np.int64((pts[i, 1] - ymin) / cell)
        if ix < 0:
            ix = 0
        if ix >= nx:
            ix = nx - 1
        if iy < 0:
            iy = 0
        if iy >= ny:
            iy = ny - 1
        c = ix * ny + iy
        cells[i] = c
        counts[c] += 1
    starts = np.zeros(nx * ny + 1, np.int64)
    for c in range(nx * ny):
        starts[c + 1] = starts[c] + counts[c]
    fill = starts[:-1].copy()
    order = np.empty(A, np.int64)
    for i in range(A):
        c = cells[i]
        order[fill[c]] = i
        fill[c] += 1
    return cells, starts, order


@njit(cache=True, parallel=True)
def _disk_pass_njit(pts, mult, r, cells, starts, order, nx, ny,
                    best_cnt, best_kind, best_ang):  # pragma: no cover
    A = pts.shape[0]
    r2 = r * r
    four_r2 = 4.0 * r * r
    for i in prange(A):
        px = pts[i, 0]
        py = pts[i, 1]
        ci = cells[i]
        cx = ci // ny
        cy = ci % ny
        # neighbor count within 2r (for event sizing) and atom-centred count
        k = 0
        atom_cnt = np.int64(0)
        for gx in range(max(0, cx - 1), min(nx, cx + 2)):
            for gy in range(max(0, cy - 1), min(ny, cy + 2)):
                c = gx * ny + gy
                for t in range(starts[c], starts[c + 1]):
                    j = order[t]
                    dx = pts[j, 0] - px
                    dy = pts[j, 1] - py
                    d2 = dx * dx + dy * dy
                    if d2 <= r2:
                        atom_cnt += mult[j]
                    if j != i and d2 <= four_r2:
                        k += 1
        best = atom_cnt
        kind = np.int64(0)
        ang = 0.0
        if k > 0:
            ev = np.empty(2 * k + 1, np.float64)
            wt = np.empty(2 * k + 1, np.int64)
            m = 0
            base = mult[i]
            for gx in range(max(0, cx - 1), min(nx, cx + 2)):
                for gy in range(max(0, cy - 1), min(ny, cy + 2)):
                    c = gx * ny + gy
                    for t in range(starts[c], starts[c + 1]):
                        j = order[t]
                        if j == i:
                            continue
                        dx = pts[j, 0] - px
                        dy = pts[j, 1] - py
                        d2 = dx * dx + dy * dy
                        if d2 > four_r2:
                            continue
                        dist = math.sqrt(d2)
                        half = math.acos(min(1.0, dist / (2.0 * r)))
                        alpha = math.atan2(dy, dx)
                        s = alpha - half
                        e = alpha + half
                        s -= _TWO_PI * math.floor(s / _TWO_PI)
                        e -= _TWO_PI * math.floor(e / _TWO_PI)
                        if s <= e:
                            ev[m] = s
                            wt[m] = mult[j]
                            ev[m + 1] = e + _END_NUDGE
                            wt[m + 1] = -mult[j]
                            m += 2
                        else:
                            base += mult[j]
                            ev[m] = e + _END_NUDGE
                            wt[m] = -mult[j]
                            ev[m + 1] = s
                            wt[m + 1] = mult[j]
                            m += 2
            idx = np.argsort(ev[:m], kind="mergesort")
            cur = base
            sweep_best = base
            sweep_ang = 0.0
            for q in range(m):
                e0 = idx[q]
                cur += wt[e0]
                if cur > sweep_best:
                    sweep_best = cur
                    sweep_ang = ev[e0]
            if sweep_best > best:
                best = sweep_best
                kind = np.int64(1)
                ang = sweep_ang
        best_cnt[i] = best
        best_kind[i] = kind
        best_ang[i] = ang


def _disk_pass_numpy(pts, mult, r, best_cnt, best_kind, best_ang):
    A = pts.shape[0]
    r2 = r * r
    four_r2 = 4.0 * r2
    for i in range(A):
        dx = pts[:, 0] - pts[i, 0]
        dy = pts[:, 1] - pts[i, 1]
        d2 = dx * dx + dy * dy
        atom_cnt = int(mult[d2 <= r2].sum())
        near = (d2 <= four_r2)
        near[i] = False
        best, kind, ang = atom_cnt, 0, 0.0
        if near.any():
            dist = np.sqrt(d2[near])
            half = np.arccos(np.minimum(1.0, dist / (2.0 * r)))
            alpha = np.arctan2(dy[near], dx[near])
            w = mult[near]
            s = np.mod(alpha - half, _TWO_PI)
            e = np.mod(alpha + half, _TWO_PI)
            wrapped = s > e
            base = int(mult[i]) + int(w[wrapped].sum())
            ev = np.concatenate([s, e + _END_NUDGE])
            wt = np.concatenate([w, -w]).astype(np.int64)
            idx = np.argsort(ev, kind="mergesort")
            run = base + np.cumsum(wt[idx])
            top = int(run.max())
            if top > best:
                best = top
                kind = 1
                ang = float(ev[idx[int(run.argmax())]])
        best_cnt[i] = best
        best_kind[i] = kind
        best_ang[i] = ang


def deepest_disk(pts: np.ndarray, mult: np.ndarray, r: float):
    """Best covered weight over all closed disks of radius ``r``.

    Returns ``(count, center_xy, pivot_index, from_atom)`` where
    ``from_atom`` means the winning candidate is centred exactly on atom
    ``pivot_index`` (so the caller can rebuild the center exactly).
    Deterministic: ties resolve to the lowest pivot index, atom candidates
    preferred over sweep candidates at the same pivot.
    """
    A = pts.shape[0]
    best_cnt = np.empty(A, np.int64)
    best_kind = np.empty(A, np.int64)
    best_ang = np.empty(A, np.float64)
    if r <= 0.0:
        i = int(np.argmax(mult))
        return int(mult[i]), pts[i].copy(), i, True
    if active_backend() == "numba" and A > 1:
        cell = 2.0 * r
        xmin = float(pts[:, 0].min())
        ymin = float(pts[:, 1].min())
        nx = max(1, int((float(pts[:, 0].max()) - xmin) / cell) + 1)
        ny = max(1, int((float(pts[:, 1].max()) - ymin) / cell) + 1)
        cells, starts, order = _grid_index_njit(pts, cell, xmin, ymin, nx, ny)
        _disk_pass_njit(pts, mult, r, cells, starts, order, nx, ny,
                        best_cnt, best_kind, best_ang)
    else:
        _disk_pass_numpy(pts, mult, r, best_cnt, best_kind, best_ang)
    i = int(np.argmax(best_cnt))
    if best_kind[i] == 0:
        return int(best_cnt[i]), pts[i].copy(), i, True
    center = pts[i] + r * np.array([math.cos(best_ang[i]), math.sin(best_ang[i])])
    return int(best_cnt[i]), center, i, False


# ---------------------------------------------------------------------------
# Midpoint quadrature over the unit ball
# ---------------------------------------------------------------------------
#
# Tensor midpoint grid on [-1, 1]^d; a cell contributes iff its center lies
# in the closed unit ball.  Integrand modes:
#   0: exp(-lam * sum_k || x . v_k + u_k ||^2)   (||.|| = distance to Z)
#   1: prod_k | cos(pi * (x . v_k)) |


@njit(cache=True, inline="always")
def _wrap2(t):  # pragma: no cover
    f = t - math.floor(t + 0.5)
    return f * f


@njit(cache=True, parallel=True)
def _quad_d1_njit(cx, V, u, lam, mode):  # pragma: no cover
    N = cx.shape[0]
    m = V.shape[0]
    acc = 0.0
    for i in prange(N):
        x = cx[i]
        if x * x > 1.0:
            continue
        if mode == 0:
            s = 0.0
            for k in range(m):
                s += _wrap2(x * V[k, 0] + u[k])
            acc += math.exp(-lam * s)
        else:
            p = 1.0
            for k in range(m):
                p *= abs(math.cos(math.pi * (x * V[k, 0])))
            acc += p
    return acc


@njit(cache=True, parallel=True)
def _quad_d2_njit(cx, V, u, lam, mode):  # pragma: no cover
    N = cx.shape[0]
    m = V.shape[0]
    acc = 0.0
    for i in prange(N):
        x = cx[i]
        x2 = x * x
        sub = 0.0
        for j in range(N):
            y = cx[j]
            if x2 + y * y > 1.0:
                continue
            if mode == 0:
                s = 0.0
                for k in range(m):
                    s += _wrap2(x * V[k, 0] + y * V[k, 1] + u[k])
                sub += math.exp(-lam * s)
            else:
                p = 1.0
                for k in range(m):
                    p *= abs(math.cos(math.pi * (x * V[k, 0] + y * V[k, 1])))
                sub += p
        acc += sub
    return acc


@njit(cache=True, parallel=True)
def _quad_d3_njit(cx, V, u, lam, mode):  # pragma: no cover
    N = cx.shape[0]
    m = V.shape[0]
    acc = 0.0
    for i in prange(N):
        x = cx[i]
        x2 = x * x
        sub = 0.0
        for j in range(N):
            y = cx[j]
            xy2 = x2 + y * y
            if xy2 > 1.0:
                continue
            for l in range(N):
                z = cx[l]
                if xy2 + z * z > 1.0:
                    continue
                if mode == 0:
                    s = 0.0
                    for k in range(m):
                        s += _wrap2(x * V[k, 0] + y * V[k, 1] + z * V[k, 2] + u[k])
                    sub += math.exp(-lam * s)
                else:
                    p = 1.0
                    for k in range(m):
                        p *= abs(math.cos(math.pi * (x * V[k, 0] + y * V[k, 1] + z * V[k, 2])))
                    sub += p
        acc += sub
    return acc


def _integrand_numpy(pts, V, u, lam, mode):
    phase = pts @ V.T + u
    if mode == 0:
        frac = phase - np.floor(phase + 0.5)
        return np.exp(-lam * (frac * frac).sum(axis=1))
    return np.abs(np.cos(np.pi * (pts @ V.T))).prod(axis=1)


def _quad_numpy(dim, cx, V, u, lam, mode):
    N = cx.shape[0]
    acc = 0.0
    if dim == 1:
        pts = cx[:, None]
        mask = cx * cx <= 1.0
        acc = float(_integrand_numpy(pts[mask], V, u, lam, mode).sum())
    elif dim == 2:
        for i in range(N):
            y2 = cx * cx
            mask = cx[i] * cx[i] + y2 <= 1.0
            if not mask.any():
                continue
            pts = np.column_stack([np.full(mask.sum(), cx[i]), cx[mask]])
            acc += float(_integrand_numpy(pts, V, u, lam, mode).sum())
    else:
        yy, zz = np.meshgrid(cx, cx, indexing="ij")
        yz2 = yy * yy + zz * zz
        for i in range(N):
            mask = cx[i] * cx[i] + yz2 <= 1.0
            if not mask.any():
                continue
            pts = np.column_stack([
                np.full(int(mask.sum()), cx[i]), yy[mask], zz[mask]])
            acc += float(_integrand_numpy(pts, V, u, lam, mode).sum())
    return acc


def quad_ball_sum(dim: int, n_axis: int, V: np.ndarray, u: np.ndarray,
                  lam: float, mode: int) -> float:
    """Midpoint-rule integral over the closed unit ball in R^dim."""
    h = 2.0 / n_axis
    cx = -1.0 + h * (np.arange(n_axis) + 0.5)
    V = np.ascontiguousarray(V, np.float64).reshape(-1, dim)
    u = np.ascontiguousarray(u, np.float64)
    if active_backend() == "numba":
        fn = {1: _quad_d1_njit, 2: _quad_d2_njit, 3: _quad_d3_njit}[dim]
        acc = fn(cx, V, u, float(lam), np.int64(mode))
    else:
        acc = _quad_numpy(dim, cx, V, u, float(lam), mode)
    return acc * h ** dim


def warmup() -> None:
    """Force-compile the njit kernels on tiny inputs (no-op on numpy backend)."""
    if active_backend() != "numba":
        return
    coords = np.ones((2, 2), np.int64)
    out = np.empty((4, 2), np.int64)
    _gray_block_njit(coords, np.int64(0), np.int64(4), out)
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.5]])
    mult = np.ones(3, np.int64)
    deepest_disk(pts, mult, 1.0)
    one = np.ones((1, 1)), np.zeros(1)
    _quad_d1_njit(np.linspace(-0.9, 0.9, 4), *one, 1.0, np.int64(0))
    _quad_d2_njit(np.linspace(-0.9, 0.9, 4), np.ones((1, 2)), np.zeros(1), 1.0, np.int64(1))
    _quad_d3_njit(np.linspace(-0.9, 0.9, 4), np.ones((1, 3)), np.zeros(1), 1.0, np.int64(0))
