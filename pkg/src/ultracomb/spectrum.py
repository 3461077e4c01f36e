"""Allele frequency spectra: exact sampling formula, harmonic limit,
stick-breaking oracle, population spectra and their per-capita limits.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import special

from .comb import Comb, Partition
from .errors import ValidationError
from .intensity import IntensityModel
from .mutation import MutationMeasure, MutationSet, _clade_bounds, assign_alleles, scatter_mutations
from .rng import RandomSource
from .sampling import sample_kingman_comb

__all__ = [
    "FrequencySpectrum",
    "esf_probability",
    "integer_partition_counts",
    "spectrum_of_partition",
    "expected_sample_spectrum",
    "sample_esf_spectra",
    "sample_kingman_allelic_partition",
    "population_spectrum",
    "normalized_tail_spectrum",
    "TailSpectrumRow",
    "gem_ranked_oracle",
]


@dataclass(frozen=True)
class FrequencySpectrum:
    """Either sample-mode counts A(k), k = 1..n, or the multiset of
    carrier measures of a whole population's alleles."""

    counts: tuple[int, ...] | None = None
    masses: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.counts is None) == (self.masses is None):
            raise ValidationError("exactly one of counts and masses must be given")
        if self.counts is not None:
            if any(c < 0 for c in self.counts):
                raise ValidationError("spectrum counts must be nonnegative")
        else:
            object.__setattr__(self, "masses", tuple(sorted(self.masses)))
            if any(m <= 0 for m in self.masses):
                raise ValidationError("carrier masses must be positive")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "FrequencySpectrum":
        return cls(counts=tuple(int(c) for c in counts))

    @classmethod
    def from_masses(cls, masses: Sequence[float]) -> "FrequencySpectrum":
        return cls(masses=tuple(float(m) for m in masses))

    @property
    def sample_size(self) -> int:
        if self.counts is None:
            raise ValidationError("population spectra have no sample size")
        return sum((k + 1) * c for k, c in enumerate(self.counts))

    def tail_count(self, q: float) -> int:
        """Number of alleles with carrier measure (or block size) >= q."""
        if self.masses is not None:
            return int(sum(1 for m in self.masses if m >= q))
        return int(sum(c for k, c in enumerate(self.counts) if k + 1 >= q))


def spectrum_of_partition(partition: Partition) -> FrequencySpectrum:
    """Counts A(k) of blocks of each cardinality; sum of k A(k) is n."""
    n = partition.n
    counts = [0] * n
    for block in partition.blocks:
        counts[len(block) - 1] += 1
    return FrequencySpectrum.from_counts(counts)


def esf_probability(theta: float, counts: Sequence[int]) -> float:
    """Exact probability of a sample spectrum under the
    infinitely-many-alleles sampling formula.

    ``counts[k-1]`` is the number of alleles carried by exactly k of the
    n sampled individuals; the counts must satisfy sum k a_k = n.
    """
    if theta <= 0:
        raise ValidationError("theta must be positive")
    a = [int(c) for c in counts]
    if any(c < 0 for c in a):
        raise ValidationError("counts must be nonnegative")
    n = sum((k + 1) * c for k, c in enumerate(a))
    if n == 0 or n != len(a):
        raise ValidationError(f"counts must satisfy sum k*a_k = n = len(counts); got {sum((k + 1) * c for k, c in enumerate(a))} vs {len(a)}")
    norm = math.factorial(n)
    for i in range(n):
        norm /= theta + i
    prob = norm
    for k, c in enumerate(a, start=1):
        if c:
            prob *= (theta / k) ** c / math.factorial(c)
    return prob


def integer_partition_counts(n: int) -> Iterator[tuple[int, ...]]:
    """All spectra of partitions of n, as count vectors (a_1, ..., a_n)."""
    if n < 1:
        raise ValidationError("n must be at least 1")

    def rec(remaining: int, largest: int, acc: list[int]) -> Iterator[tuple[int, ...]]:
        if remaining == 0:
            yield tuple(acc)
            return
        for part in range(min(remaining, largest), 0, -1):
            acc[part - 1] += 1
            yield from rec(remaining - part, part, acc)
            acc[part - 1] -= 1

    yield from rec(n, n, [0] * n)


_EXACT_LIMIT = 12


def expected_sample_spectrum(theta: float, n: int, k: int) -> float:
    """Exact mean number of alleles carried by k of n individuals, by
    exhaustive summation over integer partitions (n <= 12)."""
    if not 1 <= k <= n:
        raise ValidationError("need 1 <= k <= n")
    if n > _EXACT_LIMIT:
        raise ValidationError(f"exact mode is limited to n <= {_EXACT_LIMIT}; "
                              f"use sample_esf_spectra for Monte Carlo")
    total = 0.0
    for counts in integer_partition_counts(n):
        if counts[k - 1]:
            total += counts[k - 1] * esf_probability(theta, counts)
    return total


def sample_esf_spectra(theta: float, n: int, reps: int, rng: RandomSource) -> np.ndarray:
    """Monte Carlo spectra from the sequential description of the
    sampling formula: individual i starts a new allele with probability
    theta / (theta + i), otherwise copies a uniformly chosen predecessor.

    Returns an int32 array of shape (reps, n); row r holds A(1)..A(n).
    """
    if theta <= 0 or n < 1 or reps < 1:
        raise ValidationError("need theta > 0, n >= 1, reps >= 1")
    gen = rng.gen
    idx = np.arange(n, dtype=float)
    new_allele = gen.random((reps, n)) < theta / (theta + idx)
    targets = (gen.random((reps, n)) * idx).astype(np.int64)  # uniform in [0, i)
    cols = np.broadcast_to(np.arange(n), (reps, n))
    parents = np.where(new_allele, cols, targets)
    parents[:, 0] = 0
    # resolve pointer forests by path doubling: compose the map with
    # itself until every entry reaches its allele root
    labels = parents
    rows = np.arange(reps)[:, None]
    while True:
        nxt = labels[rows, labels]
        if np.array_equal(nxt, labels):
            break
        labels = nxt
    # block sizes, then counts-of-counts, per replicate
    flat = (labels + (np.arange(reps)[:, None] * n)).ravel()
    sizes = np.bincount(flat, minlength=reps * n).reshape(reps, n)
    spectra = np.zeros((reps, n + 1), dtype=np.int32)
    rep_idx = np.repeat(np.arange(reps), n)
    np.add.at(spectra, (rep_idx, sizes.ravel()), 1)
    return spectra[:, 1:]


def sample_kingman_allelic_partition(n: int, theta: float, rng: RandomSource,
                                     n_teeth: int | None = None) -> Partition:
    """One replicate of the full pipeline: an exchangeable-coalescent
    comb, a homogeneous mutation rain (origin branch included), and the
    allelic partition of n uniform sample positions.

    ``theta`` is the sampling-formula parameter: a new allele appears
    with probability theta / (theta + k - 1) behind k lineages.  On
    this comb pairs of lineages coalesce at unit rate per unit depth,
    so that convention corresponds to mutation density theta/2 per unit
    depth (one unit of pairwise distance spans two units of depth).

    The comb is truncated to ``n_teeth`` teeth (default 50 n), which
    bounds the unresolved depth by roughly 2/n_teeth.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    if n_teeth is None:
        n_teeth = max(64, 50 * n)
    comb = sample_kingman_comb(n_teeth, rng)
    mutations = scatter_mutations(comb, MutationMeasure.homogeneous(theta / 2.0),
                                  include_origin=True, rng=rng)
    positions = rng.gen.random(n)
    partition, _ = assign_alleles(comb, mutations, positions)
    return partition


def population_spectrum(comb: Comb, mutations: MutationSet) -> FrequencySpectrum:
    """Carrier measures of every allele present on the boundary.

    Sweeping atoms from shallow to deep, each atom's carriers are its
    clade minus the clades of shallower atoms; atoms overwritten
    everywhere contribute nothing, and the clonal remainder is not an
    allele of the mutation measure.
    """
    mutations.validate_for(comb)
    atoms = sorted(mutations.atoms, key=lambda a: a.depth)
    covered: list[list[float]] = []  # disjoint sorted [start, end) intervals
    masses: list[float] = []
    starts: list[float] = []
    for atom in atoms:
        s, e = _clade_bounds(comb, atom)
        carrier = e - s
        # subtract the overlap with already-covered intervals
        i = bisect_left(starts, s)
        if i > 0 and covered[i - 1][1] > s:
            i -= 1
        j = i
        while j < len(covered) and covered[j][0] < e:
            carrier -= min(e, covered[j][1]) - max(s, covered[j][0])
            j += 1
        if carrier > 0.0:
            masses.append(carrier)
        lo = min([s] + [covered[k][0] for k in range(i, j)])
        hi = max([e] + [covered[k][1] for k in range(i, j)])
        covered[i:j] = [[lo, hi]]
        starts[i:j] = [lo]
    return FrequencySpectrum.from_masses(masses)


def gem_ranked_oracle(theta: float, depth: int, reps: int, rng: RandomSource) -> np.ndarray:
    """Ranked stick-breaking fractions: residual-fraction sticks with
    Beta(1, theta) pieces, sorted decreasing per replicate.

    This is the limit law of the ranked largest allele blocks of the
    exchangeable coalescent, used as the simulation oracle.
    """
    if theta <= 0 or depth < 1 or reps < 1:
        raise ValidationError("need theta > 0, depth >= 1, reps >= 1")
    z = rng.gen.beta(1.0, theta, size=(reps, depth))
    pieces = np.empty_like(z)
    pieces[:, 0] = z[:, 0]
    if depth > 1:
        pieces[:, 1:] = z[:, 1:] * np.cumprod(1.0 - z, axis=1)[:, :-1]
    return np.sort(pieces, axis=1)[:, ::-1]


@dataclass(frozen=True)
class TailSpectrumRow:
    q: float
    estimate: float
    stderr: float
    target: float


def _critical_bd_replicate(theta: float, horizon: float, rng: RandomSource
                           ) -> tuple[np.ndarray, int]:
    """Allele block sizes (individual counts) of one killed critical
    birth-death genealogy, plus the number of individuals."""
    model = IntensityModel.critical_bd()
    gen = rng.gen
    p_kill = model.tail(horizon) / model.tail(0.0)
    n = int(gen.geometric(p_kill))
    nu_top, nu_zero = model.tail(horizon), model.tail(0.0)
    u = gen.random(n - 1)
    heights = model.tail_inverse(nu_top + (1.0 - u) * (nu_zero - nu_top))
    heights = np.minimum(np.asarray(heights, dtype=float), np.nextafter(horizon, 0.0))
    comb = Comb.from_arrays(float(n), horizon, np.arange(1, n, dtype=float), heights)
    mutations = scatter_mutations(comb, MutationMeasure.homogeneous(theta), True, rng)
    _, labels = assign_alleles(comb, mutations, np.arange(n) + 0.5)
    sizes: dict[int, int] = {}
    for lab in labels:
        if lab is not None:
            sizes[lab] = sizes.get(lab, 0) + 1
    return np.asarray(list(sizes.values()), dtype=float), n


def _brownian_replicate(theta: float, horizon: float, eps: float, rng: RandomSource
                        ) -> tuple[np.ndarray, float]:
    """Carrier masses of one killed Brownian-type genealogy (intensity
    tail 1/x) plus its width."""
    model = IntensityModel.brownian(mass_scale=1.0)
    gen = rng.gen
    nu_top = model.tail(horizon)
    width = gen.exponential(1.0 / nu_top)
    nu_eps = model.tail(eps)
    count = int(gen.poisson(width * (nu_eps - nu_top)))
    u = gen.random(count)
    heights = np.asarray(model.tail_inverse(nu_top + (1.0 - u) * (nu_eps - nu_top)), dtype=float)
    heights = np.minimum(heights, np.nextafter(horizon, 0.0))
    positions = np.sort(width * gen.random(count))
    keep = np.ones(count, dtype=bool)
    if count:
        keep[1:] = np.diff(positions) > 0.0
        keep &= positions > 0.0
    comb = Comb.from_arrays(width, horizon, positions[keep], heights[keep])
    mutations = scatter_mutations(comb, MutationMeasure.homogeneous(theta), True, rng)
    spec = population_spectrum(comb, mutations)
    return np.asarray(spec.masses, dtype=float), width


def normalized_tail_spectrum(model_name: str, theta: float, horizon: float,
                             qs: Sequence[float], reps: int, rng: RandomSource,
                             eps: float = 1e-3) -> list[TailSpectrumRow]:
    """Per-capita allele counts of a killed genealogy against their
    large-horizon limits.

    For the critical birth-death model the boundary is discrete and the
    estimate at integer q is the per-individual number of alleles
    carried by exactly q survivors, with limit (theta/q)(1+theta)^-q.
    For the Brownian-type model (intensity tail 1/x) the estimate at q
    is the per-unit-width number of alleles of carrier measure at least
    q, with limit theta E1(theta q).  Estimates are ratios of sums over
    replicates with a linearized standard error.
    """
    if model_name not in ("critical-bd", "brownian"):
        raise ValidationError(f"model must be 'critical-bd' or 'brownian', got {model_name!r}")
    if theta <= 0 or horizon <= 0 or reps < 2:
        raise ValidationError("need theta > 0, horizon > 0, reps >= 2")
    qs = [float(q) for q in qs]
    counts = np.zeros((reps, len(qs)))
    weights = np.zeros(reps)
    for r in range(reps):
        sub = rng.spawn(r)
        if model_name == "critical-bd":
            sizes, n = _critical_bd_replicate(theta, horizon, sub)
            weights[r] = n
            for j, q in enumerate(qs):
                counts[r, j] = np.count_nonzero(sizes == q)
        else:
            masses, width = _brownian_replicate(theta, horizon, eps, sub)
            weights[r] = width
            for j, q in enumerate(qs):
                counts[r, j] = np.count_nonzero(masses >= q)
    rows = []
    wbar = weights.mean()
    for j, q in enumerate(qs):
        est = counts[:, j].sum() / weights.sum()
        resid = counts[:, j] - est * weights
        se = float(np.std(resid, ddof=1) / (wbar * math.sqrt(reps)))
        if model_name == "critical-bd":
            target = (theta / q) * (1.0 + theta) ** (-q)
        else:
            target = theta * float(special.exp1(theta * q))
        rows.append(TailSpectrumRow(q=q, estimate=float(est), stderr=se, target=target))
    return rows
