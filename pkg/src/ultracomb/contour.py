"""Trees coded by piecewise-linear jumping contours, and their level spheres.

A contour is a cadlag path with nonnegative jumps and slope -1 in
between, reaching 0 at the end of its support.  Each jump top is a leaf
of the coded tree, each inter-jump trough is a divergence, and the path
value is distance from the root.  The sphere of the coded tree at a
level is a comb whose teeth are the depths of the excursions of the
path below that level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .comb import Comb
from .errors import EmptySphereError, ValidationError
from .tree import Tree, TreeNode

__all__ = ["ContourFunction", "tree_from_contour", "sphere_comb_from_contour"]

_CONSISTENCY_RTOL = 1e-9


@dataclass(frozen=True)
class ContourFunction:
    """A cadlag path: jumps at ``times`` from ``before`` up to ``after``,
    slope -1 in between, clamped at 0.

    ``before[i]`` must equal the value the previous segment decays to at
    ``times[i]`` (or 0 once the path has hit 0).  Zero-size jumps are
    rejected: they are not breakpoints.
    """

    times: tuple[float, ...]
    before: tuple[float, ...]
    after: tuple[float, ...]

    def __post_init__(self):
        k = len(self.times)
        if k == 0:
            raise ValidationError("a contour needs at least one jump")
        if not (len(self.before) == len(self.after) == k):
            raise ValidationError("times, before and after must have equal length")
        if any(not math.isfinite(x) for x in self.times + self.before + self.after):
            raise ValidationError("contour breakpoints must be finite")
        if any(self.times[i] >= self.times[i + 1] for i in range(k - 1)):
            raise ValidationError("jump times must be strictly increasing")
        if self.times[0] < 0.0:
            raise ValidationError("jump times must be nonnegative")
        scale = max(max(self.after), 1.0)
        for i in range(k):
            jump = self.after[i] - self.before[i]
            if jump < 0.0:
                raise ValidationError(f"negative jump at time {self.times[i]}")
            if jump == 0.0:
                raise ValidationError(f"zero-size jump at time {self.times[i]} is not a breakpoint")
            if self.before[i] < 0.0:
                raise ValidationError("contour values must be nonnegative")
            expected = 0.0 if i == 0 else max(self.after[i - 1] - (self.times[i] - self.times[i - 1]), 0.0)
            if abs(self.before[i] - expected) > _CONSISTENCY_RTOL * scale:
                raise ValidationError(
                    f"inconsistent value before jump at time {self.times[i]}: "
                    f"stored {self.before[i]}, slope -1 gives {expected}"
                )

    @classmethod
    def from_jumps(cls, jumps: list[tuple[float, float]]) -> "ContourFunction":
        """Build a contour from (time, jump size) pairs; befores are derived."""
        jumps = sorted(jumps)
        times, before, after = [], [], []
        prev_after, prev_time = 0.0, 0.0
        for i, (t, size) in enumerate(jumps):
            b = 0.0 if i == 0 else max(prev_after - (t - prev_time), 0.0)
            times.append(float(t))
            before.append(b)
            after.append(b + float(size))
            prev_after, prev_time = after[-1], times[-1]
        return cls(tuple(times), tuple(before), tuple(after))

    @property
    def support_end(self) -> float:
        """Where the path hits 0 for good."""
        return self.times[-1] + self.after[-1]

    def value(self, t: float) -> float:
        """Path value h(t) (cadlag)."""
        if t < self.times[0]:
            return 0.0
        i = int(np.searchsorted(np.asarray(self.times), t, side="right")) - 1
        return max(self.after[i] - (t - self.times[i]), 0.0)

    def infimum(self, s: float, t: float) -> float:
        """inf of the path over [min(s,t), max(s,t)].

        Within a segment the path is nonincreasing (slope -1, then flat
        at 0), so the inf is the smaller of the endpoint value and the
        pre-jump troughs inside the window.
        """
        if s > t:
            s, t = t, s
        low = self.value(t)
        for i, ti in enumerate(self.times):
            if s < ti <= t:
                low = min(low, self.before[i])
            if ti > t:
                break
        return low

    def tree_distance(self, s: float, t: float) -> float:
        """h(s) + h(t) - 2 inf over [s, t]: the coded-tree pseudo-distance."""
        return self.value(s) + self.value(t) - 2.0 * self.infimum(s, t)

    def to_dict(self) -> dict:
        return {"breakpoints": [
            {"time": t, "before": b, "after": a}
            for t, b, a in zip(self.times, self.before, self.after)
        ]}

    @classmethod
    def from_dict(cls, data: dict) -> "ContourFunction":
        try:
            bps = data["breakpoints"]
            return cls(tuple(float(b["time"]) for b in bps),
                       tuple(float(b["before"]) for b in bps),
                       tuple(float(b["after"]) for b in bps))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed contour document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ContourFunction":
        return cls.from_dict(json.loads(text))


def tree_from_contour(contour: ContourFunction) -> Tree:
    """Decode the tree: one leaf per jump top, in visit order.

    Leaf i sits at depth ``after[i]``; consecutive leaves diverge at the
    trough ``before[i]`` between them, so leaf-to-leaf distances equal
    the contour pseudo-distance at the jump times.  Exactly tied troughs
    merge into one multifurcation.
    """
    after = contour.after
    before = contour.before
    k = len(after)

    def build(lo: int, hi: int) -> TreeNode:
        if lo == hi:
            return TreeNode(depth=after[lo], label=str(lo))
        troughs = before[lo + 1:hi + 1]
        low = min(troughs)
        cuts = [lo + 1 + j for j, b in enumerate(troughs) if b == low]
        node = TreeNode(depth=low)
        seg = lo
        for cut in cuts:
            node.children.append(build(seg, cut - 1))
            seg = cut
        node.children.append(build(seg, hi))
        return node

    top = build(0, k - 1)
    if top.depth > 0.0:
        top = TreeNode(depth=0.0, children=[top])
    return Tree(top)


def sphere_comb_from_contour(contour: ContourFunction, level: float,
                             visit_width: float = 1.0) -> Comb:
    """The comb of the coded tree's sphere at ``level``.

    Each maximal excursion of the path strictly below the level, between
    consecutive visits of the level, becomes one tooth of height
    ``level - inf(excursion)``.  Visits with no dip in between are the
    same boundary point and are merged; tangencies count as zero-width
    visits.  Boundary points get ``visit_width`` of interval each, in
    visit order, and the comb's origin height is the level itself.
    """
    if level <= 0.0:
        raise ValidationError("level must be positive")
    if visit_width <= 0.0:
        raise ValidationError("visit_width must be positive")
    times, after = contour.times, contour.after
    k = len(times)

    # Each decay segment visits the level at most once (monotone between
    # jumps); up-jumps over the level identify with the next down-cross.
    n_visits = 0
    teeth_heights: list[float] = []
    dip = math.inf  # running inf of the path since the last visit

    for i in range(k):
        seg_end = times[i + 1] if i + 1 < k else contour.support_end
        bottom = max(after[i] - (seg_end - times[i]), 0.0)
        if after[i] >= level >= bottom:
            if n_visits == 0:
                n_visits = 1
            elif dip < level:
                teeth_heights.append(level - dip)
                n_visits += 1
            # else: no dip below the level since the last visit, so this
            # is the same sphere point (distance 0); merge silently
            dip = level
        dip = min(dip, bottom)
    if n_visits == 0:
        raise EmptySphereError(f"the contour never reaches level {level}")

    positions = visit_width * np.arange(1, n_visits, dtype=float)
    return Comb.from_arrays(visit_width * n_visits, level,
                            positions, np.asarray(teeth_heights, dtype=float))
