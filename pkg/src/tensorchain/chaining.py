"""Finite metric spaces and generic-chaining functionals.

The chaining complexity of a finite index set is measured through
admissible sequences: nested-size families (T_n) with |T_0| = 1 and
|T_n| <= 2^(2^n).  Evaluating the weighted sum sup_t sum_n 2^(n/beta)
d(t, T_n) for a *given* sequence is exact and cheap; minimizing over all
sequences is hard, so this module separates evaluation from search: a
deterministic farthest-point greedy supplies good sequences, and an
exhaustive oracle certifies optimality on spaces with at most 16 points.

Sequences are stored finitely and terminate at the first level containing
every point; the formally infinite tail contributes zero from there on.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapacityError, DomainError, ValidationError

_TRIANGLE_TOL = 1e-9
_EXACT_COVER_LIMIT = 20
_EXHAUSTIVE_LIMIT = 16


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Index set {0, ..., size-1} with one or more named distance matrices."""

    size: int
    metrics: dict

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError("metric space must contain at least one point")
        if not self.metrics:
            raise ValidationError("metric space needs at least one metric")
        frozen = {}
        for name, mat in self.metrics.items():
            arr = np.ascontiguousarray(mat, dtype=np.float64)
            if arr.shape != (self.size, self.size):
                raise ValidationError(f"metric {name!r} has shape {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValidationError(f"metric {name!r} has non-finite entries")
            if (arr < 0).any():
                raise ValidationError(f"metric {name!r} has negative distances")
            if np.abs(np.diag(arr)).max(initial=0.0) > 1e-12:
                raise ValidationError(f"metric {name!r} has a nonzero diagonal")
            if np.abs(arr - arr.T).max() > 1e-12:
                raise ValidationError(f"metric {name!r} is not symmetric")
            if kernels.max_triangle_violation(arr) > _TRIANGLE_TOL:
                raise ValidationError(f"metric {name!r} violates the triangle inequality")
            arr.flags.writeable = False
            frozen[str(name)] = arr
        object.__setattr__(self, "metrics", frozen)

    @classmethod
    def from_points(cls, points, name="euclidean") -> "FiniteMetricSpace":
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[0] == 1 and pts.shape[1] > 1 and np.ndim(points) == 1:
            pts = pts.T
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        dist = (dist + dist.T) / 2.0
        np.fill_diagonal(dist, 0.0)
        return cls(pts.shape[0], {name: dist})

    def distance_matrix(self, metric_id: str) -> np.ndarray:
        try:
            return self.metrics[metric_id]
        except KeyError:
            raise KeyError(f"unknown metric id {metric_id!r}") from None

    def with_metric(self, name: str, matrix) -> "FiniteMetricSpace":
        merged = dict(self.metrics)
        merged[name] = matrix
        return FiniteMetricSpace(self.size, merged)

    def scaled(self, factor: float) -> "FiniteMetricSpace":
        return FiniteMetricSpace(
            self.size, {k: v * float(factor) for k, v in self.metrics.items()}
        )


def diameter(space: FiniteMetricSpace, metric_id: str) -> float:
    return float(space.distance_matrix(metric_id).max())


# ---------------------------------------------------------------------------
# admissible sequences
# ---------------------------------------------------------------------------


def level_cap(n: int) -> int:
    """Cardinality cap at level n: 1 at the root, then 2^(2^n)."""
    return 1 if n == 0 else 2 ** (2**n)


@dataclass(frozen=True)
class AdmissibleSequence:
    """Nested-size subsets (T_n), ending at a level equal to the whole set."""

    size: int
    levels: tuple

    def __post_init__(self):
        levels = tuple(tuple(sorted(int(i) for i in lev)) for lev in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValidationError("sequence needs at least one level")
        for n, lev in enumerate(levels):
            if len(set(lev)) != len(lev):
                raise ValidationError(f"level {n} repeats a point")
            if any(i < 0 or i >= self.size for i in lev):
                raise ValidationError(f"level {n} references a point outside the space")
            if len(lev) > level_cap(n):
                raise ValidationError(
                    f"level {n} has {len(lev)} points, cap is {level_cap(n)}"
                )
        if len(levels[-1]) != self.size:
            raise ValidationError("final level must contain every point")

    @property
    def depth(self) -> int:
        return len(self.levels)

    def to_json(self) -> str:
        return json.dumps([list(lev) for lev in self.levels])

    @classmethod
    def from_json(cls, text: str, size: int) -> "AdmissibleSequence":
        return cls(size, tuple(tuple(lev) for lev in json.loads(text)))


def _level_arrays(seq: AdmissibleSequence):
    members = np.array(
        [i for lev in seq.levels for i in lev], dtype=np.int64
    )
    offsets = np.zeros(len(seq.levels) + 1, dtype=np.int64)
    np.cumsum([len(lev) for lev in seq.levels], out=offsets[1:])
    return members, offsets


def _check_pair(space: FiniteMetricSpace, seq: AdmissibleSequence):
    if seq.size != space.size:
        raise ValidationError(
            f"sequence is over {seq.size} points, space has {space.size}"
        )


def gamma_value(space, metric_id, beta, seq: AdmissibleSequence) -> float:
    """sup_t sum_n 2^(n/beta) d(t, T_n) for the given sequence."""
    return gamma_truncated_value(space, metric_id, beta, 1.0, seq)


def gamma_truncated_value(space, metric_id, beta, p, seq: AdmissibleSequence) -> float:
    """Same weighted sum started at level floor(log2 p)."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    if p < 1:
        raise DomainError("p must be at least 1")
    _check_pair(space, seq)
    dist = space.distance_matrix(metric_id)
    start = int(math.floor(math.log2(p)))
    weights = np.array(
        [2.0 ** (n / beta) if n >= start else 0.0 for n in range(seq.depth)]
    )
    members, offsets = _level_arrays(seq)
    return float(kernels.chain_sum(dist, members, offsets, weights))


def build_admissible_greedy(space, metric_id, beta) -> AdmissibleSequence:
    """Farthest-point-seeded sequence; each level is a prefix of the ordering.

    The point choice is metric-driven only; ``beta`` does not affect the
    levels, just how they are later weighted.
    """
    if beta <= 0:
        raise DomainError("beta must be positive")
    dist = space.distance_matrix(metric_id)
    order = kernels.farthest_point_order(dist)
    levels = []
    n = 0
    while True:
        take = min(level_cap(n), space.size)
        levels.append(tuple(int(i) for i in order[:take]))
        if take == space.size:
            break
        n += 1
    return AdmissibleSequence(space.size, tuple(levels))


def gamma_exhaustive(space, metric_id, beta) -> float:
    """Exact infimum over admissible sequences for spaces with <= 16 points.

    With at most 16 points the level-2 cap already allows the whole set,
    so all terms beyond level 1 vanish and the infimum reduces to the best
    root point plus the best level-1 subset of size min(4, |T|); later
    levels only shrink the sum, so the maximal subset size is optimal.
    """
    if beta <= 0:
        raise DomainError("beta must be positive")
    if space.size > _EXHAUSTIVE_LIMIT:
        raise CapacityError(
            f"exhaustive search limited to {_EXHAUSTIVE_LIMIT} points, "
            f"got {space.size}; use build_admissible_greedy"
        )
    if space.size == 1:
        return 0.0
    dist = space.distance_matrix(metric_id)
    k = min(4, space.size)
    subs = np.array(list(itertools.combinations(range(space.size), k)), dtype=np.int64)
    return float(kernels.gamma2_scan(dist, subs, 2.0 ** (1.0 / beta)))


@dataclass(frozen=True)
class ChainMaps:
    """Nearest-point projections onto each level of a sequence."""

    seq: AdmissibleSequence
    projections: tuple  # per level, int array of length size


def chain_maps(space, metric_id, seq: AdmissibleSequence) -> ChainMaps:
    _check_pair(space, seq)
    dist = space.distance_matrix(metric_id)
    projections = []
    for lev in seq.levels:
        members = np.array(lev, dtype=np.int64)
        # ties break toward the lowest point index: members are sorted and
        # argmin returns the first minimum
        nearest = members[np.argmin(dist[:, members], axis=1)]
        nearest.flags.writeable = False
        projections.append(nearest)
    return ChainMaps(seq, tuple(projections))


# ---------------------------------------------------------------------------
# covering numbers and the entropy integral
# ---------------------------------------------------------------------------


def _ball_masks(dist: np.ndarray, u: float):
    within = dist <= u
    n = dist.shape[0]
    masks = []
    for c in range(n):
        m = 0
        for t in range(n):
            if within[c, t]:
                m |= 1 << t
        masks.append(m)
    return masks


def _exact_cover_count(dist: np.ndarray, u: float) -> int:
    n = dist.shape[0]
    full = (1 << n) - 1
    masks = _ball_masks(dist, u)
    order = sorted(range(n), key=lambda c: -bin(masks[c]).count("1"))
    best = kernels.greedy_cover(dist <= u)

    def descend(covered: int, used: int):
        nonlocal best
        if covered == full:
            best = min(best, used)
            return
        if used + 1 >= best:
            return
        # branch on the uncovered point with the fewest candidate balls
        rest = full & ~covered
        point = -1
        fewest = n + 1
        for t in range(n):
            if rest >> t & 1:
                cnt = sum(1 for c in range(n) if masks[c] >> t & 1)
                if cnt < fewest:
                    fewest = cnt
                    point = t
        for c in order:
            if masks[c] >> point & 1:
                descend(covered | masks[c], used + 1)

    descend(0, 0)
    return best


def covering_number(space, metric_id, u: float) -> int:
    """Minimum number of closed u-balls centered in T that cover T.

    Exact (branch and bound seeded by greedy) up to 20 points; the greedy
    upper bound beyond that.
    """
    if u <= 0:
        raise DomainError("radius must be positive")
    return _covering_number_at(space.distance_matrix(metric_id), u)


def _covering_number_at(dist: np.ndarray, u: float) -> int:
    if dist.shape[0] <= _EXACT_COVER_LIMIT:
        return int(_exact_cover_count(dist, u))
    return int(kernels.greedy_cover(dist <= u))


def dudley_integral(space, metric_id) -> float:
    """Entropy integral of sqrt(log N(u)) over (0, diameter].

    N(u) is piecewise constant between consecutive realized distances, so
    the step sum below is the exact value of the integral.
    """
    dist = space.distance_matrix(metric_id)
    if space.size == 1:
        return 0.0
    positive = np.unique(dist[dist > 0])
    if positive.size == 0:
        return 0.0
    breakpoints = np.concatenate(([0.0], positive))
    total = 0.0
    for k in range(len(breakpoints) - 1):
        count = _covering_number_at(dist, breakpoints[k])
        total += math.sqrt(math.log(count)) * (breakpoints[k + 1] - breakpoints[k])
    return total


# ---------------------------------------------------------------------------
# partition sequences
# ---------------------------------------------------------------------------


def _canonical_partition(cells):
    canon = tuple(sorted((tuple(sorted(c)) for c in cells), key=lambda c: c[0]))
    return canon


@dataclass(frozen=True)
class PartitionSequence:
    """Increasingly fine partitions with the doubly-exponential cap.

    Level 0 is required to be the trivial one-cell partition; that is what
    lets intersected sequences stay admissible after the level shift.
    """

    size: int
    levels: tuple

    def __post_init__(self):
        levels = tuple(_canonical_partition(lev) for lev in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValidationError("partition sequence needs at least one level")
        ground = tuple(range(self.size))
        for i, lev in enumerate(levels):
            flat = tuple(sorted(p for cell in lev for p in cell))
            if flat != ground:
                raise ValidationError(f"level {i} is not a partition of the ground set")
            if len(lev) > level_cap(i):
                raise ValidationError(
                    f"level {i} has {len(lev)} cells, cap is {level_cap(i)}"
                )
        for i in range(1, len(levels)):
            parents = {}
            for ci, cell in enumerate(levels[i - 1]):
                for p in cell:
                    parents[p] = ci
            for cell in levels[i]:
                if len({parents[p] for p in cell}) != 1:
                    raise ValidationError(f"level {i} does not refine level {i - 1}")

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level_at(self, i: int):
        """Level i with clamping: negative levels give the root, indices past
        the stored depth give the finest stored partition."""
        i = min(max(i, 0), self.depth - 1)
        return self.levels[i]

    def cell_of(self, i: int, point: int):
        for cell in self.level_at(i):
            if point in cell:
                return cell
        raise ValidationError(f"point {point} missing from level {i}")


def intersect_partitions(parts) -> PartitionSequence:
    """Common refinement across sequences, shifted so the result stays admissible.

    Level i of the result collects the nonempty intersections of the input
    cells at level i - ceil(log2 m); the shift absorbs the cell-count blowup
    of crossing m partitions.
    """
    parts = list(parts)
    if not parts:
        raise ValidationError("need at least one partition sequence")
    size = parts[0].size
    if any(p.size != size for p in parts):
        raise ValidationError("partition sequences cover different ground sets")
    m = len(parts)
    shift = math.ceil(math.log2(m)) if m > 1 else 0
    depth = max(p.depth for p in parts) + shift
    out_levels = []
    for i in range(depth):
        labels = {}
        for point in range(size):
            key = tuple(p.cell_of(i - shift, point) for p in parts)
            labels.setdefault(key, []).append(point)
        out_levels.append(tuple(tuple(cell) for cell in labels.values()))
    return PartitionSequence(size, tuple(out_levels))


def gamma_prime_value(space, metric_id, n, parts: PartitionSequence) -> float:
    """sup_t sum_i 2^(i/n) diam(cell containing t at level i)."""
    if n <= 0:
        raise DomainError("exponent must be positive")
    if parts.size != space.size:
        raise ValidationError("partition sequence does not match the space")
    dist = space.distance_matrix(metric_id)
    per_point = np.zeros(space.size)
    for i, lev in enumerate(parts.levels):
        w = 2.0 ** (i / n)
        for cell in lev:
            sel = np.array(cell, dtype=np.int64)
            diam = float(dist[np.ix_(sel, sel)].max()) if len(cell) > 1 else 0.0
            per_point[sel] += w * diam
    return float(per_point.max())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_SPACE_HEADER = "tensorchain-metric-space 1"


def space_to_text(space: FiniteMetricSpace) -> str:
    lines = [_SPACE_HEADER, f"size {space.size}"]
    for name in sorted(space.metrics):
        lines.append(f"metric {name}")
        for row in space.metrics[name]:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def space_from_text(text: str) -> FiniteMetricSpace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != _SPACE_HEADER:
        raise ValidationError("not a metric-space record")
    if not lines[1].startswith("size "):
        raise ValidationError("malformed metric-space header")
    size = int(lines[1].split()[1])
    metrics = {}
    pos = 2
    while pos < len(lines):
        if not lines[pos].startswith("metric "):
            raise ValidationError(f"expected a metric header at line {pos}")
        name = lines[pos].split(None, 1)[1]
        rows = lines[pos + 1 : pos + 1 + size]
        if len(rows) != size:
            raise ValidationError(f"metric {name!r} is truncated")
        metrics[name] = np.array([[float(v) for v in r.split()] for r in rows])
        pos += 1 + size
    return FiniteMetricSpace(size, metrics)


def save_space(space: FiniteMetricSpace, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(space_to_text(space))


def load_space(path) -> FiniteMetricSpace:
    with open(path, "r", encoding="ascii") as fh:
        return space_from_text(fh.read())
