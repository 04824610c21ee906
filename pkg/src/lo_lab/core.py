"""Domain types and exact operations on signed vector sums.

Coordinates are exact rationals.  Enumeration scales every vector by the
common denominator so the 2^n signed sums live on an integer lattice,
where merging equal sums is exact integer comparison.  Probabilities are
dyadic rationals m / 2^n held exactly.

Ball membership is exact (integer/rational arithmetic) whenever the ball
itself is rational; balls produced by square-root constructions are
handled in float64 with a relative inclusion tolerance on the squared
radius (default 1e-9), and results derived from them say so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels

DEFAULT_ENUM_CAP = 30
DEFAULT_ATOM_CAP = {1: 1 << 22, 2: 1 << 18, 3: 512}
DEFAULT_TAU = 1e-9

_ENUM_CHUNK = 1 << 20
_INT64_SAFE = 1 << 62


class LoLabError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(LoLabError):
    """Malformed or inconsistent input (CLI exit code 1)."""


class CapExceededError(LoLabError):
    """A configurable size cap was exceeded (CLI exit code 2)."""


class VerificationError(LoLabError):
    """An internal cross-check failed (CLI exit code 3)."""


def as_fraction(x) -> Fraction:
    """Coerce int/str/float/Fraction to an exact Fraction.

    Strings accept "p/q" and decimal literals; floats convert to their
    exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise InvalidInputError(f"cannot interpret {x!r} as a rational number")


# ---------------------------------------------------------------------------
# Exact dyadic probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class ExactProb:
    """Exact probability m / 2^n with arbitrary-precision numerator."""

    num: int
    log2_den: int

    def __post_init__(self):
        if not (0 <= self.num <= (1 << self.log2_den)):
            raise InvalidInputError(
                f"probability {self.num}/2^{self.log2_den} outside [0, 1]")

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.log2_den)

    def __float__(self) -> float:
        return float(self.as_fraction())

    def _cmp_key(self, other):
        if isinstance(other, ExactProb):
            return self.num << other.log2_den, other.num << self.log2_den
        f = as_fraction(other)
        return self.num * f.denominator, f.numerator << self.log2_den

    def __eq__(self, other):
        a, b = self._cmp_key(other)
        return a == b

    def __lt__(self, other):
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other):
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other):
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other):
        a, b = self._cmp_key(other)
        return a >= b

    def __hash__(self):
        return hash(self.as_fraction())

    def __str__(self):
        if self.log2_den <= 20:
            return f"{self.num}/{1 << self.log2_den}"
        return f"{self.num}/2^{self.log2_den}"


# ---------------------------------------------------------------------------
# Geometry carriers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball; membership is |x - center| <= radius."""

    center: tuple
    radius: object

    def __post_init__(self):
        r = self.radius
        if (isinstance(r, (int, Fraction)) and r < 0) or (
                isinstance(r, float) and r < 0.0):
            raise InvalidInputError("ball radius must be nonnegative")
        object.__setattr__(self, "center", tuple(self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def is_rational(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.center) and \
            isinstance(self.radius, (int, Fraction))

    def center_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.center], dtype=np.float64)


@dataclass(frozen=True)
class VectorConfig:
    """A multiset of vectors in R^d with exact rational coordinates.

    Every vector must have Euclidean norm >= 1 (checked on the squared
    norm in exact arithmetic) unless ``relaxed`` is set, which is recorded
    on the value for downstream reporting.
    """

    dim: int
    vectors: tuple
    delta: Fraction | None = None
    relaxed: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")
        rows = tuple(tuple(as_fraction(c) for c in v) for v in self.vectors)
        object.__setattr__(self, "vectors", rows)
        if self.delta is not None:
            d = as_fraction(self.delta)
            if d < 0:
                raise InvalidInputError("delta must be nonnegative")
            object.__setattr__(self, "delta", d)
        for v in rows:
            if len(v) != self.dim:
                raise InvalidInputError(
                    f"vector {v} has {len(v)} coordinates, expected {self.dim}")
        if not self.relaxed:
            for v in rows:
                if sum(c * c for c in v) < 1:
                    raise InvalidInputError(
                        f"vector {tuple(map(str, v))} has norm < 1 "
                        "(use relaxed=True to allow)")

    @property
    def n(self) -> int:
        return len(self.vectors)

    def float_view(self) -> np.ndarray:
        out = np.empty((self.n, self.dim), dtype=np.float64)
        for i, v in enumerate(self.vectors):
            for k, c in enumerate(v):
                out[i, k] = float(c)
        return out

    def lattice(self) -> tuple[int, list[tuple[int, ...]]]:
        """Common denominator L and the vectors as integer multiples of 1/L."""
        scale = 1
        for v in self.vectors:
            for c in v:
                scale = scale * c.denominator // math.gcd(scale, c.denominator)
        rows = [tuple(int(c * scale) for c in v) for v in self.vectors]
        return scale, rows


@dataclass
class SumCloud:
    """Distinct values of the signed sum with exact multiplicities.

    Atom coordinates are integers over the common denominator ``scale``.
    They are held in an int64 array when they fit, otherwise as Python
    integer tuples (``wide`` layout) to preserve exactness.
    """

    dim: int
    n: int
    scale: int
    atoms: object
    mult: object

    @property
    def wide(self) -> bool:
        return not isinstance(self.atoms, np.ndarray)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    def total_mass(self) -> int:
        if isinstance(self.mult, np.ndarray):
            return int(self.mult.sum())
        return sum(self.mult)

    def float_atoms(self) -> np.ndarray:
        if self.wide:
            out = np.array([[float(c) for c in row] for row in self.atoms],
                           dtype=np.float64)
            return out / float(self.scale)
        return self.atoms.astype(np.float64) / float(self.scale)

    def mult_array(self) -> np.ndarray:
        if isinstance(self.mult, np.ndarray):
            return self.mult
        return np.array(self.mult, dtype=np.float64)

    def rational_atom(self, i: int) -> tuple[Fraction, ...]:
        row = self.atoms[i]
        return tuple(Fraction(int(c), self.scale) for c in row)

    def validate(self) -> None:
        if self.total_mass() != 1 << self.n:
            raise VerificationError(
                f"atom multiplicities sum to {self.total_mass()}, "
                f"expected 2^{self.n}")

    def is_negation_symmetric(self) -> bool:
        if self.wide:
            table = {tuple(a): m for a, m in zip(self.atoms, self.mult)}
            return all(table.get(tuple(-c for c in a)) == m
                       for a, m in table.items())
        table = {tuple(int(c) for c in a): int(m)
                 for a, m in zip(self.atoms, self.mult)}
        return all(table.get(tuple(-c for c in a)) == m
                   for a, m in table.items())


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _collapse_int64(points: np.ndarray, mult: np.ndarray | None):
    """Merge duplicate rows, summing multiplicities; rows come back sorted."""
    if points.shape[0] == 0:
        return points, np.zeros(0, np.int64)
    mins = points.min(axis=0)
    shifted = points - mins
    spans = shifted.max(axis=0).astype(object) + 1
    total = 1
    for s in spans:
        total *= int(s)
    if total < _INT64_SAFE:
        key = np.zeros(points.shape[0], np.int64)
        for k in range(points.shape[1]):
            key = key * int(spans[k]) + shifted[:, k]
        order = np.argsort(key, kind="stable")
        key = key[order]
        boundaries = np.empty(key.shape[0], bool)
        boundaries[0] = True
        np.not_equal(key[1:], key[:-1], out=boundaries[1:])
        starts = np.flatnonzero(boundaries)
    else:
        order = np.lexsort(points.T[::-1])
        sorted_pts = points[order]
        diff = np.any(sorted_pts[1:] != sorted_pts[:-1], axis=1)
        starts = np.concatenate([[0], np.flatnonzero(diff) + 1])
    if mult is None:
        msorted = np.ones(points.shape[0], np.int64)
    else:
        msorted = mult[order]
    sums = np.add.reduceat(msorted, starts)
    return points[order[starts]], sums


def _enumerate_int64(coords: list[tuple[int, ...]], n: int, dim: int):
    arr = np.array(coords, dtype=np.int64).reshape(n, dim)
    total = 1 << n
    atoms = None
    mult = None
    for t0 in range(0, total, _ENUM_CHUNK):
        t1 = min(total, t0 + _ENUM_CHUNK)
        block = kernels.gray_sums_block(arr, t0, t1)
        b_atoms, b_mult = _collapse_int64(block, None)
        if atoms is None:
            atoms, mult = b_atoms, b_mult
        else:
            atoms, mult = _collapse_int64(
                np.concatenate([atoms, b_atoms]),
                np.concatenate([mult, b_mult]))
    return atoms, mult


def _enumerate_wide(coords: list[tuple[int, ...]], n: int, dim: int):
    """Gray-code walk with Python integers for lattices beyond int64."""
    table: dict[tuple, int] = {}
    s = [sum(c[k] for c in coords) for k in range(dim)]
    table[tuple(s)] = 1
    for t in range(1, 1 << n):
        j = (t & -t).bit_length() - 1
        g = t ^ (t >> 1)
        sign = -2 if (g >> j) & 1 else 2
        for k in range(dim):
            s[k] += sign * coords[j][k]
        key = tuple(s)
        table[key] = table.get(key, 0) + 1
    items = sorted(table.items())
    return [a for a, _ in items], [m for _, m in items]


def enumerate_sums(config: VectorConfig, cap: int = DEFAULT_ENUM_CAP) -> SumCloud:
    """All 2^n signed sums of the configuration, merged exactly.

    Traverses sign patterns in reflected Gray-code order so each step is a
    single-coordinate update.  Refuses n beyond ``cap``.
    """
    n, dim = config.n, config.dim
    if n > cap:
        raise CapExceededError(f"n={n} exceeds enumeration cap {cap}")
    scale, coords = config.lattice()
    if n == 0:
        return SumCloud(dim, 0, scale,
                        np.zeros((1, dim), np.int64),
                        np.ones(1, np.int64))
    col_bound = max(sum(abs(c[k]) for c in coords) for k in range(dim))
    if col_bound < _INT64_SAFE:
        atoms, mult = _enumerate_int64(coords, n, dim)
        cloud = SumCloud(dim, n, scale, atoms, mult)
    else:
        atoms, mult = _enumerate_wide(coords, n, dim)
        cloud = SumCloud(dim, n, scale, atoms, mult)
    cloud.validate()
    return cloud


# ---------------------------------------------------------------------------
# Ball probability
# ---------------------------------------------------------------------------


def _exact_mass_in_ball(cloud: SumCloud, ball: Ball) -> int:
    """Covered multiplicity with fully rational membership tests."""
    r2 = as_fraction(ball.radius) ** 2
    center = [as_fraction(c) for c in ball.center]
    den = cloud.scale
    for c in center:
        den = den * c.denominator // math.gcd(den, c.denominator)
    c_int = [int(c * den) for c in center]
    lift = den // cloud.scale
    bound = r2 * den * den  # compare |x*den/scale - c*den|^2 <= r^2*den^2
    rhs_num, rhs_den = bound.numerator, bound.denominator

    if not cloud.wide:
        pts = cloud.atoms.astype(object) * lift
        total = 0
        mult = cloud.mult
        for i in range(pts.shape[0]):
            d2 = 0
            for k in range(cloud.dim):
                t = int(pts[i, k]) - c_int[k]
                d2 += t * t
            if d2 * rhs_den <= rhs_num:
                total += int(mult[i])
        return total
    total = 0
    for row, m in zip(cloud.atoms, cloud.mult):
        d2 = 0
        for k in range(cloud.dim):
            t = row[k] * lift - c_int[k]
            d2 += t * t
        if d2 * rhs_den <= rhs_num:
            total += m
    return total


def _float_mass_in_ball(cloud: SumCloud, ball: Ball, tau: float) -> int:
    pts = cloud.float_atoms()
    c = ball.center_floats()
    r = float(ball.radius)
    d2 = ((pts - c) ** 2).sum(axis=1)
    mask = d2 <= r * r * (1.0 + tau)
    if isinstance(cloud.mult, np.ndarray):
        return int(cloud.mult[mask].sum())
    return sum(m for m, keep in zip(cloud.mult, mask) if keep)


def prob_in_ball(cloud: SumCloud, ball: Ball, tau: float = DEFAULT_TAU) -> ExactProb:
    """P(sum in closed ball) as an exact dyadic rational.

    Rational balls are decided in exact arithmetic; float balls use a
    relative tolerance ``tau`` on the squared radius (inclusion side).
    """
    if ball.dim != cloud.dim:
        raise InvalidInputError(
            f"ball dimension {ball.dim} != cloud dimension {cloud.dim}")
    if ball.is_rational:
        mass = _exact_mass_in_ball(cloud, ball)
    else:
        mass = _float_mass_in_ball(cloud, ball, tau)
    return ExactProb(mass, cloud.n)


# ---------------------------------------------------------------------------
# Deepest ball of fixed radius
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxBallResult:
    """Maximum covered probability over closed balls of a fixed radius."""

    prob: ExactProb
    ball: Ball
    method: str
    exact: bool
    tau: float


def _max_ball_1d(cloud: SumCloud, delta: Fraction) -> MaxBallResult:
    pairs = sorted((int(a[0]) if not cloud.wide else a[0], int(m))
                   for a, m in zip(cloud.atoms, cloud.mult))
    xs = [p[0] for p in pairs]
    ms = [p[1] for p in pairs]
    # window [x_i, x_j] fits in a ball of radius delta iff
    # (x_j - x_i) / scale <= 2*delta
    lim_num = 2 * delta.numerator * cloud.scale
    lim_den = delta.denominator
    best = 0
    best_i = best_j = 0
    j = 0
    run = 0
    for i in range(len(xs)):
        if j < i:
            j, run = i, 0
        while j < len(xs) and (xs[j] - xs[i]) * lim_den <= lim_num:
            run += ms[j]
            j += 1
        if run > best:
            best, best_i, best_j = run, i, j - 1
        run -= ms[i]
    center = Fraction(xs[best_i] + xs[best_j], 2 * cloud.scale)
    ball = Ball((center,), delta)
    prob = prob_in_ball(cloud, ball)
    if prob.num != best:
        raise VerificationError(
            f"window mass {best} disagrees with recount {prob.num}")
    return MaxBallResult(prob, ball, "window-exact", True, 0.0)


def _candidate_counts(pts: np.ndarray, mult: np.ndarray, centers: np.ndarray,
                      r_incl: float) -> np.ndarray:
    counts = np.empty(centers.shape[0], np.int64)
    lim = r_incl * r_incl
    chunk = max(1, (1 << 22) // max(1, pts.shape[0]))
    for c0 in range(0, centers.shape[0], chunk):
        sub = centers[c0:c0 + chunk]
        d2 = ((sub[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        counts[c0:c0 + chunk] = (d2 <= lim) @ mult
    return counts


def _pair_centers_lifted(p: np.ndarray, q: np.ndarray, r: float) -> list[np.ndarray]:
    """Two canonical centers at distance r from both p and q (any dim)."""
    w = q - p
    d2 = float(w @ w)
    h2 = r * r - d2 / 4.0
    if h2 < 0:
        return []
    m = (p + q) / 2.0
    axis = np.zeros(len(w))
    axis[int(np.argmin(np.abs(w)))] = 1.0
    perp = axis - (axis @ w) / d2 * w
    norm = math.sqrt(float(perp @ perp))
    if norm == 0.0:
        return [m]
    perp /= norm
    h = math.sqrt(max(0.0, h2))
    return [m + h * perp, m - h * perp]


def _triple_centers_lifted(p, q, s, r):
    """Circumcenter of a 3D triangle lifted both ways to distance r."""
    u = q - p
    v = s - p
    cross = np.cross(u, v)
    cc2 = float(cross @ cross)
    if cc2 < 1e-24:
        return []
    uu = float(u @ u)
    vv = float(v @ v)
    rel = (np.cross((uu * v - vv * u), cross)) / (2.0 * cc2)
    rho2 = float(rel @ rel)
    h2 = r * r - rho2
    if h2 < 0:
        return []
    nrm = cross / math.sqrt(cc2)
    h = math.sqrt(max(0.0, h2))
    base = p + rel
    return [base + h * nrm, base - h * nrm]


def _max_ball_candidates(cloud: SumCloud, delta: Fraction, tau: float,
                         with_triples: bool, method: str) -> MaxBallResult:
    pts = cloud.float_atoms()
    mult = np.asarray(cloud.mult_array(), np.int64)
    r = float(delta)
    r_kernel = r * (1.0 + 0.25 * tau)
    A = pts.shape[0]
    best_cnt = int(mult.max())
    best_center = pts[int(np.argmax(mult))]
    best_atom = int(np.argmax(mult))
    from_atom = True
    atom_counts = _candidate_counts(pts, mult, pts, r_kernel)
    i = int(np.argmax(atom_counts))
    if atom_counts[i] > best_cnt:
        best_cnt, best_center, best_atom, from_atom = \
            int(atom_counts[i]), pts[i], i, True
    centers = []
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    ii, jj = np.nonzero(np.triu(d2 <= 4.0 * r_kernel * r_kernel, k=1))
    for a, b in zip(ii, jj):
        centers.extend(_pair_centers_lifted(pts[a], pts[b], r_kernel))
    if with_triples:
        near = d2 <= 4.0 * r_kernel * r_kernel
        for a in range(A):
            nb = np.flatnonzero(near[a])
            nb = nb[nb > a]
            for x in range(len(nb)):
                for y in range(x + 1, len(nb)):
                    b, c = int(nb[x]), int(nb[y])
                    if not near[b, c]:
                        continue
                    centers.extend(
                        _triple_centers_lifted(pts[a], pts[b], pts[c], r_kernel))
    if centers:
        carr = np.asarray(centers)
        counts = _candidate_counts(pts, mult, carr, r_kernel)
        j = int(np.argmax(counts))
        if counts[j] > best_cnt:
            best_cnt = int(counts[j])
            best_center = carr[j]
            from_atom = False
    if from_atom:
        ball = Ball(cloud.rational_atom(best_atom), delta)
        prob = prob_in_ball(cloud, ball)
        return MaxBallResult(prob, ball, method + "/atom", True, 0.0)
    ball = Ball(tuple(float(c) for c in best_center), float(delta))
    prob = prob_in_ball(cloud, ball, tau)
    return MaxBallResult(prob, ball, method, False, tau)


def max_ball_probability(cloud: SumCloud, delta, *, atom_cap: int | None = None,
                         heuristic: bool = False,
                         tau: float = DEFAULT_TAU) -> MaxBallResult:
    """Maximum of prob_in_ball over all closed balls of radius ``delta``.

    d=1 slides an exact window over the sorted atoms; d=2 runs the
    boundary-pair angular sweep plus atom-centred candidates; d=3 adds
    circumcenter-lifted triples.  Above d=3 an explicitly flagged
    heuristic candidate set is used.  The reported probability is always
    the recount of the witness ball, so reported value and witness agree
    by construction.
    """
    delta = as_fraction(delta)
    if delta < 0:
        raise InvalidInputError("delta must be nonnegative")
    cap = atom_cap if atom_cap is not None else \
        DEFAULT_ATOM_CAP.get(cloud.dim, 4096)
    if cloud.num_atoms > cap:
        raise CapExceededError(
            f"{cloud.num_atoms} distinct atoms exceed cap {cap} "
            f"for d={cloud.dim}")
    if cloud.dim == 1:
        return _max_ball_1d(cloud, delta)
    if cloud.dim == 2:
        return _max_ball_sweep_2d(cloud, delta, tau)
    if cloud.dim == 3:
        return _max_ball_candidates(cloud, delta, tau, True, "candidates-3d")
    if not heuristic:
        raise InvalidInputError(
            f"exact search supports d<=3; got d={cloud.dim} "
            "(pass heuristic=True for a flagged heuristic search)")
    return _max_ball_candidates(cloud, delta, tau, False, "heuristic")


def _max_ball_sweep_2d(cloud: SumCloud, delta: Fraction, tau: float) -> MaxBallResult:
    pts = np.ascontiguousarray(cloud.float_atoms())
    mult = np.ascontiguousarray(cloud.mult_array().astype(np.int64))
    r_kernel = float(delta) * (1.0 + 0.25 * tau)
    count, center, pivot, from_atom = kernels.deepest_disk(pts, mult, r_kernel)
    if from_atom:
        ball = Ball(cloud.rational_atom(pivot), delta)
        prob = prob_in_ball(cloud, ball)
        return MaxBallResult(prob, ball, "pair-sweep/atom", True, 0.0)
    ball = Ball(tuple(float(c) for c in center), float(delta))
    prob = prob_in_ball(cloud, ball, tau)
    return MaxBallResult(prob, ball, "pair-sweep", False, tau)
