"""Finite combs, the comb ultrametric, ball partitions, and the
comb/ultrametric-matrix constructions.

A comb is a finite set of teeth (position, height) on an interval
``[0, interval_length]`` together with an origin branch of height
``origin_height`` attached at 0.  The distance between two boundary
points is twice the tallest tooth between them, which makes the
boundary a compact ultrametric space; tooth heights are coalescence
depths measured back from the present.

Boundary points are position/face pairs.  For the interior points used
by all samplers the two faces coincide; the faces only differ at tooth
positions, where the left and right side of the tooth sit at distance
twice the tooth height.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .tree import Tree, TreeNode

__all__ = [
    "Comb",
    "BoundaryPoint",
    "Partition",
    "comb_distance",
    "ball_partition",
    "comb_from_ultrametric",
    "comb_to_tree",
    "validate_ultrametric",
]

_FACES = ("left", "right")


class Comb:
    """An immutable comb: sorted teeth on ``[0, interval_length]``.

    Teeth positions are strictly increasing and strictly inside the
    interval; heights are positive and strictly below ``origin_height``.
    Heights may tie (ball partitions use <= consistently), positions may
    not.  Instances are safe to share across workers; treat the arrays
    as read-only.
    """

    __slots__ = ("interval_length", "origin_height", "positions", "heights",
                 "_block", "_blockmax")

    def __init__(self, interval_length: float, origin_height: float,
                 teeth: Sequence[tuple[float, float]] = ()):
        teeth = list(teeth)
        positions = np.array([t[0] for t in teeth], dtype=float)
        heights = np.array([t[1] for t in teeth], dtype=float)
        order = np.argsort(positions, kind="stable")
        self._init_from_arrays(float(interval_length), float(origin_height),
                               positions[order], heights[order])

    @classmethod
    def from_arrays(cls, interval_length: float, origin_height: float,
                    positions: np.ndarray, heights: np.ndarray) -> "Comb":
        """Fast path for samplers: arrays must already be sorted by position."""
        comb = cls.__new__(cls)
        comb._init_from_arrays(float(interval_length), float(origin_height),
                               np.asarray(positions, dtype=float),
                               np.asarray(heights, dtype=float))
        return comb

    def _init_from_arrays(self, interval_length, origin_height, positions, heights):
        if not (math.isfinite(interval_length) and interval_length > 0):
            raise ValidationError(f"interval_length must be positive, got {interval_length}")
        if not (math.isfinite(origin_height) and origin_height > 0):
            raise ValidationError(f"origin_height must be positive, got {origin_height}")
        if positions.shape != heights.shape or positions.ndim != 1:
            raise ValidationError("positions and heights must be 1-d arrays of equal length")
        if positions.size:
            if not (positions[0] > 0.0 and positions[-1] < interval_length):
                raise ValidationError("tooth positions must lie strictly inside the interval")
            if np.any(np.diff(positions) <= 0.0):
                raise ValidationError("tooth positions must be strictly increasing (no duplicates)")
            if not np.all(heights > 0.0):
                raise ValidationError("tooth heights must be strictly positive")
            if not np.all(heights < origin_height):
                raise ValidationError("origin_height must exceed every tooth height")
        positions.flags.writeable = False
        heights.flags.writeable = False
        self.interval_length = interval_length
        self.origin_height = origin_height
        self.positions = positions
        self.heights = heights
        self._block = 0
        self._blockmax = None

    @property
    def n_teeth(self) -> int:
        return int(self.positions.size)

    @property
    def teeth(self) -> list[tuple[float, float]]:
        return list(zip(self.positions.tolist(), self.heights.tolist()))

    def height_at(self, position: float) -> float:
        """Tooth height at an exact position, 0.0 if no tooth there."""
        i = int(np.searchsorted(self.positions, position))
        if i < self.n_teeth and self.positions[i] == position:
            return float(self.heights[i])
        return 0.0

    def max_height_between(self, lo: int, hi: int) -> float:
        """Max tooth height over index slice [lo, hi); 0.0 if empty."""
        if hi <= lo:
            return 0.0
        return float(self.heights[lo:hi].max())

    def next_taller(self, start: int, level: float) -> int:
        """First tooth index >= start with height > level (n_teeth if none).

        Uses cached sqrt-decomposition block maxima so repeated queries on
        big combs stay cheap.
        """
        n = self.n_teeth
        if start >= n:
            return n
        if self._blockmax is None:
            block = max(1, int(math.sqrt(n)))
            pad = (-n) % block
            padded = np.pad(self.heights, (0, pad), constant_values=0.0)
            self._block = block
            self._blockmax = padded.reshape(-1, block).max(axis=1)
        block = self._block
        b = start // block
        # partial first block
        end = min((b + 1) * block, n)
        seg = self.heights[start:end]
        hit = np.nonzero(seg > level)[0]
        if hit.size:
            return start + int(hit[0])
        for bb in range(b + 1, self._blockmax.size):
            if self._blockmax[bb] > level:
                lo = bb * block
                seg = self.heights[lo:min(lo + block, n)]
                hit = np.nonzero(seg > level)[0]
                return lo + int(hit[0])
        return n

    def gap_lengths(self) -> np.ndarray:
        """Lengths of the inter-tooth intervals (the boundary measure)."""
        edges = np.concatenate(([0.0], self.positions, [self.interval_length]))
        return np.diff(edges)

    def to_dict(self) -> dict:
        return {
            "interval_length": self.interval_length,
            "origin_height": self.origin_height,
            "teeth": [{"pos": p, "h": h} for p, h in self.teeth],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Comb":
        try:
            teeth = [(t["pos"], t["h"]) for t in data["teeth"]]
            return cls(data["interval_length"], data["origin_height"], teeth)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed comb document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Comb":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Comb):
            return NotImplemented
        return (self.interval_length == other.interval_length
                and self.origin_height == other.origin_height
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.heights, other.heights))

    def __repr__(self) -> str:
        return (f"Comb(interval_length={self.interval_length}, "
                f"origin_height={self.origin_height}, n_teeth={self.n_teeth})")


@dataclass(frozen=True)
class BoundaryPoint:
    """A boundary point: a position with a left or right face.

    The left face at position 0 is identified with the origin and is
    disallowed.
    """

    position: float
    face: str = "right"

    def __post_init__(self):
        if self.face not in _FACES:
            raise ValidationError(f"face must be 'left' or 'right', got {self.face!r}")
        if self.position < 0.0:
            raise ValidationError("position must be nonnegative")
        if self.position == 0.0 and self.face == "left":
            raise ValidationError("the left face at position 0 is identified with the origin")


@dataclass(frozen=True)
class Partition:
    """A partition of indices 0..n-1 into disjoint blocks.

    Blocks are stored sorted by their smallest element, so equal
    partitions compare equal.
    """

    blocks: tuple[frozenset[int], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for block in self.blocks:
            if not block:
                raise ValidationError("partition blocks must be nonempty")
            if seen & block:
                raise ValidationError("partition blocks must be disjoint")
            seen |= block
        if seen and seen != set(range(len(seen))):
            raise ValidationError("partition blocks must cover 0..n-1")
        ordered = tuple(sorted(self.blocks, key=min))
        object.__setattr__(self, "blocks", ordered)

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(frozenset(g) for g in groups.values()))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def block_sizes(self) -> list[int]:
        return sorted((len(b) for b in self.blocks), reverse=True)

    def block_of(self, i: int) -> frozenset[int]:
        for block in self.blocks:
            if i in block:
                return block
        raise ValidationError(f"index {i} not in partition")

    def refines(self, other: "Partition") -> bool:
        """True if every block of self is contained in a block of other."""
        lookup = {}
        for j, block in enumerate(other.blocks):
            for i in block:
                lookup[i] = j
        for block in self.blocks:
            targets = {lookup.get(i) for i in block}
            if len(targets) != 1 or None in targets:
                return False
        return True


def _as_point(p) -> BoundaryPoint:
    if isinstance(p, BoundaryPoint):
        return p
    return BoundaryPoint(float(p), "right")


def comb_distance(comb: Comb, p, q) -> float:
    """Comb metric between two boundary points: twice the tallest tooth
    between them, with face rules deciding whether endpoint teeth count.

    ``p`` and ``q`` may be plain floats, which are read as right faces
    (for points away from teeth the faces coincide).
    """
    p = _as_point(p)
    q = _as_point(q)
    a = comb.interval_length
    for pt in (p, q):
        if not 0.0 <= pt.position <= a:
            raise ValidationError(f"position {pt.position} outside [0, {a}]")
    if p.position == q.position:
        if p.face == q.face:
            return 0.0
        return 2.0 * comb.height_at(p.position)
    if p.position > q.position:
        p, q = q, p
    # teeth in the interval between p and q; a point's own tooth counts
    # only when approached from its left face (for p) / right face (for q)
    side_lo = "left" if p.face == "left" else "right"
    side_hi = "right" if q.face == "right" else "left"
    lo = int(np.searchsorted(comb.positions, p.position, side=side_lo))
    hi = int(np.searchsorted(comb.positions, q.position, side=side_hi))
    return 2.0 * comb.max_height_between(lo, hi)


def ball_partition(comb: Comb, positions: Sequence[float], radius: float) -> Partition:
    """Partition sample positions into balls of radius ``radius``.

    Two positions fall in the same block iff their comb distance is
    <= radius.  On a comb the blocks are contiguous in position order,
    so the partition is cut at inter-sample gaps whose tallest tooth
    exceeds radius/2.  An empty position list yields an empty partition.
    """
    if radius <= 0.0:
        raise ValidationError("radius must be positive")
    pts = np.asarray(list(positions), dtype=float)
    if pts.size == 0:
        return Partition(())
    if np.any(pts < 0.0) or np.any(pts > comb.interval_length):
        raise ValidationError("sample positions outside the comb interval")
    order = np.argsort(pts, kind="stable")
    sorted_pts = pts[order]
    blocks: list[list[int]] = [[int(order[0])]]
    for k in range(1, sorted_pts.size):
        lo = int(np.searchsorted(comb.positions, sorted_pts[k - 1], side="right"))
        hi = int(np.searchsorted(comb.positions, sorted_pts[k], side="right"))
        gap = comb.max_height_between(lo, hi)
        if 2.0 * gap <= radius:
            blocks[-1].append(int(order[k]))
        else:
            blocks.append([int(order[k])])
    return Partition(tuple(frozenset(b) for b in blocks))


def validate_ultrametric(matrix: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Check a matrix is a valid ultrametric on distinct points.

    Requires symmetry, zero diagonal, positive off-diagonal entries and
    the triple inequality d(i,k) <= max(d(i,j), d(j,k)) up to a relative
    tolerance.  Returns the validated float matrix.
    """
    d = np.asarray(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError("distance matrix must be square")
    n = d.shape[0]
    if n == 0:
        raise ValidationError("distance matrix must contain at least one point")
    if not np.allclose(d, d.T, rtol=rtol, atol=0.0):
        raise ValidationError("distance matrix must be symmetric")
    if np.any(np.diag(d) != 0.0):
        raise ValidationError("distance matrix must have a zero diagonal")
    off = d[~np.eye(n, dtype=bool)]
    if off.size and np.any(off <= 0.0):
        raise ValidationError("off-diagonal distances must be positive (points must be distinct)")
    scale = float(off.max()) if off.size else 0.0
    tol = rtol * scale
    # d[i, k] <= max(d[i, j], d[j, k]) for all j; chunk j to bound memory
    for j in range(n):
        bound = np.maximum.outer(d[:, j], d[j, :])
        if np.any(d > bound + tol):
            i, k = np.unravel_index(int(np.argmax(d - bound)), d.shape)
            raise ValidationError(
                f"ultrametric inequality violated for triple ({i}, {j}, {k}): "
                f"d={d[i, k]} > max({d[i, j]}, {d[j, k]})"
            )
    return d


def comb_from_ultrametric(matrix, masses: Sequence[float] | None = None
                          ) -> tuple[Comb, list[tuple[float, float]]]:
    """Build a comb realizing a finite ultrametric, plus the placement map.

    Each point is mapped to a subinterval whose length is its mass; a
    wall of height d/2 separates the sub-balls of every ball of diameter
    d, so any representatives of two placements reproduce the matrix
    exactly.  Without explicit masses the visibility masses are used:
    total mass 1, split equally among sub-balls at each fragmentation
    (tie diameters fragment independently, i.e. in decreasing order).

    Returns ``(comb, placements)`` with ``placements[i] = (start, end)``.
    The comb's origin height is set to the diameter (twice the tallest
    wall), or 1.0 for a single point.
    """
    d = validate_ultrametric(matrix)
    n = d.shape[0]
    if masses is not None:
        m = np.asarray(list(masses), dtype=float)
        if m.shape != (n,):
            raise ValidationError("masses must match the number of points")
        if np.any(m <= 0.0) or not np.all(np.isfinite(m)):
            raise ValidationError("masses must be positive and finite")
    else:
        m = None

    placements: list[tuple[float, float] | None] = [None] * n
    teeth: list[tuple[float, float]] = []

    def mass_of(indices: list[int], visibility: float) -> float:
        if m is not None:
            return float(m[indices].sum())
        return visibility

    def place(indices: list[int], start: float, visibility: float) -> float:
        if len(indices) == 1:
            width = mass_of(indices, visibility)
            placements[indices[0]] = (start, start + width)
            return start + width
        sub = d[np.ix_(indices, indices)]
        diam = float(sub.max())
        # sub-balls: equivalence classes of d < diam (ultrametric transitivity)
        remaining = list(indices)
        children: list[list[int]] = []
        while remaining:
            i = remaining[0]
            block = [j for j in remaining if d[i, j] < diam]
            children.append(block)
            remaining = [j for j in remaining if j not in block]
        children.sort(key=min)
        child_vis = visibility / len(children)
        cursor = start
        for k, child in enumerate(children):
            if k > 0:
                teeth.append((cursor, diam / 2.0))
            cursor = place(child, cursor, child_vis)
        return cursor

    total = place(list(range(n)), 0.0, 1.0)
    diam = float(d.max())
    origin = diam if diam > 0.0 else 1.0
    comb = Comb(total, origin, teeth)
    return comb, [p for p in placements if p is not None]


def comb_to_tree(comb: Comb) -> Tree:
    """The rooted tree behind a comb: one leaf per inter-tooth interval.

    Leaves are labelled '0'..'n' in interval order and all sit at depth
    ``origin_height`` below the root; an internal node at depth
    ``origin_height - h`` joins the intervals separated by a tooth of
    height h.  Teeth with exactly equal heights merge into one
    multifurcation so that all edge lengths stay positive.
    """
    T = comb.origin_height
    heights = comb.heights

    def build(tooth_lo: int, tooth_hi: int, leaf_lo: int) -> TreeNode:
        # teeth indices [tooth_lo, tooth_hi) span leaves [leaf_lo, leaf_lo + count)
        if tooth_hi <= tooth_lo:
            return TreeNode(depth=T, label=str(leaf_lo))
        h = float(heights[tooth_lo:tooth_hi].max())
        cuts = [k for k in range(tooth_lo, tooth_hi) if heights[k] == h]
        node = TreeNode(depth=T - h)
        seg_lo = tooth_lo
        leaf = leaf_lo
        for cut in cuts:
            node.children.append(build(seg_lo, cut, leaf))
            leaf += cut - seg_lo + 1
            seg_lo = cut + 1
        node.children.append(build(seg_lo, tooth_hi, leaf))
        return node

    top = build(0, comb.n_teeth, 0)
    root = TreeNode(depth=0.0, children=[top])
    return Tree(root)
