"""Random and deterministic comb generators.

Covers the exchangeable-coalescent comb, coalescent point processes
sampled by inverse-tail transform from an intensity model, the p-adic
comb, event-driven splitting-tree simulation with its reduction to a
comb at a horizon, and the small-scale zoom operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comb import Comb
from .errors import ResourceError, ValidationError
from .intensity import IntensityModel, Lifetime
from .rng import RandomSource
from .tree import Tree, TreeNode

__all__ = [
    "CppSample",
    "sample_kingman_comb",
    "sample_cpp",
    "sample_cpp_fixed_width",
    "padic_comb",
    "sample_splitting_tree",
    "reduce_population_tree",
    "rescale_comb",
    "unrescale_comb",
]


@dataclass(frozen=True)
class CppSample:
    """A killed coalescent point process: the comb, its width, and the
    height of the killing atom (> the comb height; inf when the model's
    tail is unknown past the horizon)."""

    comb: Comb
    width: float
    killing_height: float

    def __post_init__(self):
        if self.width != self.comb.interval_length:
            raise ValidationError("width must equal the comb interval length")
        if not self.killing_height > self.comb.origin_height:
            raise ValidationError("killing height must exceed the comb height")
        if self.comb.n_teeth and not np.all(self.comb.heights < self.comb.origin_height):
            raise ValidationError("all teeth must lie below the comb height")


def _distinct_uniforms(gen, n: int, width: float) -> np.ndarray:
    """n sorted distinct uniforms on (0, width); collisions trigger a redraw."""
    if n == 0:
        return np.empty(0)
    for _ in range(8):
        pos = width * gen.random(n)
        pos.sort()
        if pos[0] > 0.0 and np.all(np.diff(pos) > 0.0):
            return pos
    raise ResourceError("could not draw distinct interior positions")


def sample_kingman_comb(n_teeth: int, rng: RandomSource) -> Comb:
    """The exchangeable-coalescent comb truncated to its n tallest teeth.

    The j-th tallest tooth is the tail sum of independent exponentials
    with rates k(k-1)/2 for k up to n+1; the remaining tail beyond the
    truncation is replaced by its analytic mean 2/(n+1), so each tooth
    has mean exactly 2/j and the truncation only hides structure finer
    than about 2/n.  Positions are i.i.d. uniform on (0, 1) and the
    origin branch extends one unit above the tallest tooth.
    """
    if n_teeth < 1:
        raise ValidationError("n_teeth must be at least 1")
    gen = rng.gen
    ks = np.arange(2, n_teeth + 2, dtype=float)
    waits = gen.exponential(2.0 / (ks * (ks - 1.0)))
    heights_by_rank = np.cumsum(waits[::-1])[::-1] + 2.0 / (n_teeth + 1)
    for _ in range(8):
        raw = gen.random(n_teeth)
        if raw.min() > 0.0 and np.unique(raw).size == n_teeth:
            break
    else:
        raise ResourceError("could not draw distinct tooth positions")
    order = np.argsort(raw, kind="stable")
    return Comb.from_arrays(1.0, float(heights_by_rank[0]) + 1.0,
                            raw[order], heights_by_rank[order])


def sample_cpp(model: IntensityModel, horizon: float, eps: float,
               rng: RandomSource) -> CppSample:
    """A coalescent point process of height ``horizon``, teeth below
    ``eps`` truncated away.

    Uses the killed-width decomposition: width ~ Exp(tail(horizon)),
    tooth count ~ Poisson(width * (tail(eps) - tail(horizon))), positions
    i.i.d. uniform, heights i.i.d. from the intensity restricted to
    [eps, horizon) by inverse-tail sampling.
    """
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    if not 0 <= eps < horizon:
        raise ValidationError("need 0 <= eps < horizon")
    nu_top = float(model.tail(horizon))
    nu_eps = float(model.tail(eps))
    if not (math.isfinite(nu_eps) and nu_eps >= 0):
        raise ValidationError(f"intensity tail at eps={eps} must be finite; "
                              f"got {nu_eps} (raise eps)")
    if not (math.isfinite(nu_top) and nu_top > 0):
        raise ValidationError(f"intensity tail at the horizon must be positive and finite, got {nu_top}")
    gen = rng.gen
    width = gen.exponential(1.0 / nu_top)
    count = gen.poisson(width * (nu_eps - nu_top))
    u = gen.random(count)
    heights = np.asarray(model.tail_inverse(nu_top + (1.0 - u) * (nu_eps - nu_top)), dtype=float)
    # float guard: inverse evaluation may land exactly on the horizon
    heights = np.minimum(heights, np.nextafter(horizon, 0.0))
    positions = _distinct_uniforms(gen, int(count), width)
    comb = Comb.from_arrays(width, horizon, positions, heights)
    if model.support_top <= horizon:
        killing = math.inf
    else:
        v = gen.random()
        while v == 0.0:
            v = gen.random()
        killing = float(model.tail_inverse(v * nu_top))
        killing = max(killing, float(np.nextafter(horizon, math.inf)))
    return CppSample(comb=comb, width=width, killing_height=killing)


def sample_cpp_fixed_width(model: IntensityModel, width: float, eps: float,
                           rng: RandomSource, height_cap: float | None = None
                           ) -> Comb:
    """Teeth of an unkilled coalescent point process on a fixed window.

    By independence of the underlying point process, conditioning the
    killed width to exceed ``width`` leaves the teeth on [0, width]
    unconditioned, so this is the window every almost-sure statement
    about unbounded-height processes gets checked on.  With a height
    cap, heights are restricted to [eps, cap) and the cap becomes the
    comb height; otherwise heights are unbounded and the origin is set
    just above the tallest tooth.
    """
    if width <= 0:
        raise ValidationError("width must be positive")
    if eps < 0 or (height_cap is not None and eps >= height_cap):
        raise ValidationError("need 0 <= eps (< height_cap when capped)")
    nu_eps = float(model.tail(eps))
    if not math.isfinite(nu_eps):
        raise ValidationError(f"intensity tail at eps={eps} must be finite (raise eps)")
    nu_cap = float(model.tail(height_cap)) if height_cap is not None else 0.0
    gen = rng.gen
    count = gen.poisson(width * (nu_eps - nu_cap))
    u = gen.random(count)
    heights = np.asarray(model.tail_inverse(nu_cap + (1.0 - u) * (nu_eps - nu_cap)), dtype=float)
    positions = _distinct_uniforms(gen, int(count), width)
    if height_cap is not None:
        heights = np.minimum(heights, np.nextafter(height_cap, 0.0))
        origin = float(height_cap)
    else:
        origin = float(heights.max()) + 1.0 if count else 1.0
    return Comb.from_arrays(width, origin, positions, heights)


def padic_comb(p: int, depth: int) -> Comb:
    """The comb of the boundary of the infinite p-ary tree, truncated at
    ``depth`` levels.

    A level-n point k/p^n (k not divisible by p) carries a tooth of
    height p^-n / 2, so the doubled-max comb metric reproduces the
    p-adic distances exactly: sequences first differing at coordinate n
    sit at distance p^-n, and the two faces of a level-n point are
    p^-n apart.  The interval is [0, 1] and the origin height 1.
    """
    if p < 2:
        raise ValidationError("p must be at least 2")
    if depth < 1:
        raise ValidationError("depth must be at least 1")
    if p ** depth > 2 ** 50:
        raise ValidationError(f"p^depth = {p}^{depth} exceeds the representable position grid")
    positions: list[np.ndarray] = []
    heights: list[np.ndarray] = []
    for n in range(1, depth + 1):
        denom = p ** n
        ks = np.arange(1, denom)
        ks = ks[ks % p != 0]
        positions.append(ks / float(denom))
        heights.append(np.full(ks.size, 0.5 / denom))
    pos = np.concatenate(positions)
    hts = np.concatenate(heights)
    order = np.argsort(pos, kind="stable")
    return Comb.from_arrays(1.0, 1.0, pos[order], hts[order])


def sample_splitting_tree(birth_rate: float, lifetime: Lifetime, horizon: float,
                          rng: RandomSource, max_retries: int = 10_000) -> Tree:
    """Simulate a binary splitting tree up to a horizon, conditioned on
    having at least one individual alive there.

    Individuals give birth at constant rate over their lifetime
    (event-driven; births after the horizon are not generated).  The
    returned tree is planar in contour order: each individual's tip
    comes first, then its children latest-born first, which is the
    orientation whose reduced comb is a coalescent point process.
    Leaves of survivors sit exactly at the horizon.  Raises
    ResourceError if every attempt dies out before the horizon.
    """
    if birth_rate <= 0:
        raise ValidationError("birth rate must be positive")
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    gen = rng.gen
    for _ in range(max_retries):
        births = [0.0]
        deaths = [float(lifetime.sample_death(0.0, gen))]
        children: list[list[int]] = [[]]
        stack = [0]
        while stack:
            i = stack.pop()
            window = min(deaths[i], horizon) - births[i]
            if window <= 0:
                continue
            m = int(gen.poisson(birth_rate * window))
            if m == 0:
                continue
            times = births[i] + window * gen.random(m)
            times.sort()
            for t in times:
                j = len(births)
                births.append(float(t))
                deaths.append(float(lifetime.sample_death(float(t), gen)))
                children[i].append(j)
                children.append([])
                stack.append(j)
        if any(d > horizon for d in deaths):
            break
    else:
        raise ResourceError(f"no attempt out of {max_retries} survived to the horizon")

    # assemble lifeline chains bottom-up; children carry larger indices
    chains: list[TreeNode | None] = [None] * len(births)
    for i in range(len(births) - 1, -1, -1):
        node = TreeNode(depth=min(deaths[i], horizon), label=str(i))
        for j in reversed(children[i]):
            node = TreeNode(depth=births[j], children=[node, chains[j]])
        chains[i] = node
    return Tree(TreeNode(depth=0.0, children=[chains[0]]))


def reduce_population_tree(tree: Tree, horizon: float) -> Comb:
    """The comb of a population tree's boundary at a horizon.

    Survivors are the edges crossing the horizon, in planar order; each
    gets a unit of interval, and consecutive survivors are separated by
    a tooth whose height is the time back to their divergence.  Raises
    if nothing reaches the horizon.
    """
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    paths: list[tuple] = []  # ancestor chains (node ids with depths) per survivor

    def walk(node: TreeNode, chain: list[tuple[int, float]]):
        chain.append((id(node), node.depth))
        for child in node.children:
            if child.depth >= horizon:
                if node.depth < horizon:
                    paths.append(tuple(chain))
                # subtrees above the horizon carry no further survivors
            else:
                walk(child, chain)
        chain.pop()

    walk(tree.root, [])
    n = len(paths)
    if n == 0:
        raise ValidationError(f"no lineage reaches the horizon {horizon}")
    heights = np.empty(n - 1)
    for k in range(1, n):
        prev, cur = paths[k - 1], paths[k]
        depth = tree.root.depth
        for a, b in zip(prev, cur):
            if a[0] != b[0]:
                break
            depth = a[1]
        heights[k - 1] = horizon - depth
    positions = np.arange(1, n, dtype=float)
    return Comb.from_arrays(float(n), horizon, positions, heights)


def rescale_comb(comb: Comb, eps: float) -> Comb:
    """Zoom in on the initial eps-window: keep teeth with position below
    eps and divide positions and heights (and the origin) by eps.

    With eps = 1 on a unit-interval comb this is the identity.  A tooth
    exactly at position eps would land on the new interval boundary and
    is dropped (a measure-zero difference from the closed window).
    """
    if not 0.0 < eps <= 1.0:
        raise ValidationError("eps must be in (0, 1]")
    keep = comb.positions < eps
    new_interval = min(comb.interval_length, eps) / eps
    return Comb.from_arrays(new_interval, comb.origin_height / eps,
                            comb.positions[keep] / eps, comb.heights[keep] / eps)


def unrescale_comb(comb: Comb, eps: float) -> Comb:
    """Inverse of :func:`rescale_comb` on the retained window."""
    if not 0.0 < eps <= 1.0:
        raise ValidationError("eps must be in (0, 1]")
    return Comb.from_arrays(comb.interval_length * eps, comb.origin_height * eps,
                            comb.positions * eps, comb.heights * eps)
