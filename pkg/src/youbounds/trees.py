"""Pure-birth tree sampling and exact per-tree conditional moments.

A tree over n tips is stored event-indexed rather than pointer-shaped: the n
inter-event periods (the k-th lasting an Exp(k) time, stem included) plus, for
each of the n-1 speciation events, the index of the lineage that split. That
is enough to answer every aggregate query the bounds need, in O(n) per tree:
tree height, the per-event daughter tip counts, and the age of each event
measured back from the present.

Conditional on a tree (and on jump placements), the normalized tip average is
exactly normal, so sampling it needs no per-tip path simulation: one normal
draw from the exact conditional mean and variance below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import JumpSchedule, YouParams


@dataclass(frozen=True)
class YuleTree:
    """Event-indexed pure-birth tree.

    times[k-1] is the duration of the period with k alive lineages; the tree
    height is the full sum (the final period, with n lineages, counts).
    splits[k-1] is the 0-based index, among the k alive lineages, of the one
    that split at event k. daughter_counts[k-1] holds the number of tips that
    descend through each of event k's two daughter edges, and
    coalescence_ages[k-1] the time from the present back to event k.
    """

    times: np.ndarray
    splits: np.ndarray
    daughter_counts: np.ndarray
    coalescence_ages: np.ndarray

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def height(self) -> float:
        return float(np.sum(self.times))


def _derive_counts(n: int, splits: np.ndarray) -> np.ndarray:
    """Daughter tip counts per event via one forward and one reverse pass.

    Lineage ids: the root lineage is 0 and event k creates ids 2k-1 and 2k in
    place of the lineage it split. Plain lists beat numpy here; the loop is
    inherently sequential.
    """
    alive = [0] * n
    parent = [0] * (n - 1)
    split_list = [int(s) for s in splits]
    for k in range(1, n):
        j = split_list[k - 1]
        parent[k - 1] = alive[j]
        alive[j] = 2 * k - 1
        alive[k] = 2 * k
    desc = [0] * (2 * n - 1)
    for tip in alive:
        desc[tip] = 1
    for k in range(n - 1, 0, -1):
        desc[parent[k - 1]] = desc[2 * k - 1] + desc[2 * k]
    desc_arr = np.asarray(desc, dtype=np.int64)
    return np.stack((desc_arr[1::2], desc_arr[2::2]), axis=1)


def _build_tree(times: np.ndarray, splits: np.ndarray) -> YuleTree:
    n = len(times)
    counts = _derive_counts(n, splits)
    suffix = np.cumsum(times[::-1])[::-1]
    ages = suffix[1:].copy() if n > 1 else np.empty(0, dtype=np.float64)
    for arr in (times, splits, counts, ages):
        arr.setflags(write=False)
    return YuleTree(times=times, splits=splits, daughter_counts=counts,
                    coalescence_ages=ages)


def sample_tree(n: int, rng: np.random.Generator) -> YuleTree:
    """Sample an n-tip pure-birth tree.

    Period durations are inverse-CDF exponentials from 64-bit uniforms
    (re-drawing the measure-zero u = 0 case so every duration is strictly
    positive); the splitting lineage at event k is uniform over the k alive.
    """
    if n < 1 or int(n) != n:
        raise ValueError(f"sample_tree requires an integer n >= 1, got {n}")
    n = int(n)
    u = rng.random(n)
    while True:
        zero = u == 0.0
        if not zero.any():
            break
        u[zero] = rng.random(int(zero.sum()))
    rates = np.arange(1, n + 1, dtype=np.float64)
    times = -np.log1p(-u) / rates
    if n > 1:
        splits = rng.integers(0, np.arange(1, n), dtype=np.int64)
    else:
        splits = np.empty(0, dtype=np.int64)
    return _build_tree(times, splits)


def pair_mean_exp(tree: YuleTree, y: float) -> float:
    """Average of exp(-y * coalescence time) over all tip pairs of the tree.

    Pairs whose most recent common ancestor is event k contribute with the
    event's age; there are exactly left*right such pairs, so the whole
    average needs one pass over events.
    """
    n = tree.n
    if n < 2:
        raise ValueError(f"pair_mean_exp requires n >= 2, got {n}")
    pairs = tree.daughter_counts[:, 0] * tree.daughter_counts[:, 1]
    weight = np.exp(-y * tree.coalescence_ages)
    return float(np.dot(pairs.astype(np.float64), weight) / (n * (n - 1) / 2.0))


@dataclass(frozen=True)
class ConditionalMoments:
    """Exact mean and variance of the normalized tip average given the tree
    (and, for the jump model, given the jump placements)."""

    cond_mean: float
    cond_var: float


def conditional_moments_you(tree: YuleTree, params: YouParams) -> ConditionalMoments:
    """Conditional moments for the jump-free model.

    mean: delta * exp(-alpha * height). variance: 1/n + (1 - 1/n) * pair
    average of exp(-2 alpha age) - exp(-2 alpha height), which is the
    covariance-matrix average in O(n) form; it is always at least the
    single-tip share (1/n)(1 - exp(-2 alpha height)).
    """
    n = tree.n
    height = tree.height
    a = params.alpha
    cond_mean = params.delta * math.exp(-a * height)
    tip_term = math.exp(-2.0 * a * height)
    if n == 1:
        return ConditionalMoments(cond_mean, 1.0 - tip_term)
    pair = pair_mean_exp(tree, 2.0 * a)
    cond_var = 1.0 / n + (1.0 - 1.0 / n) * pair - tip_term
    return ConditionalMoments(cond_mean, cond_var)


@dataclass(frozen=True)
class JumpRealization:
    """Jump placements for one tree: a boolean flag per daughter slot (two
    per speciation event) and the jump variance attached to each event."""

    flags: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        if self.flags.shape != (len(self.variances), 2):
            raise ValueError("flags must have shape (events, 2) matching variances")


def sample_jumps(tree: YuleTree, schedule: JumpSchedule,
                 rng: np.random.Generator) -> JumpRealization:
    """Independent Bernoulli draws for every daughter slot of the tree.

    Always consumes exactly 2(n-1) uniforms, so downstream draws stay aligned
    across schedules with the same tree. A schedule that does not cover all
    n-1 events is a configuration error.
    """
    n = tree.n
    event_params = schedule.event_params(n)
    ps = np.array([p for p, _ in event_params], dtype=np.float64)
    variances = np.array([s for _, s in event_params], dtype=np.float64)
    flags = rng.random((n - 1, 2)) < ps[:, None]
    return JumpRealization(flags=flags, variances=variances)


def conditional_moments_youj(tree: YuleTree, jumps: JumpRealization,
                             params: YouParams) -> ConditionalMoments:
    """Conditional moments with jumps.

    Jumps are mean zero, so the conditional mean is unchanged. Each jumping
    daughter slot adds (2 alpha / sigma_a2) sigma_c2 exp(-2 alpha age) d^2 /
    n^2 to the conditional variance, d being the number of tips descending
    through that slot (d^2 merges the d diagonal and d(d-1) off-diagonal
    covariance entries the jump feeds).
    """
    base = conditional_moments_you(tree, params)
    n = tree.n
    if n < 2 or not jumps.flags.any():
        return base
    weight = jumps.variances * np.exp(-2.0 * params.alpha * tree.coalescence_ages)
    d2 = tree.daughter_counts.astype(np.float64) ** 2
    slot_sum = float(np.sum((jumps.flags * d2).sum(axis=1) * weight))
    add = (2.0 * params.alpha / params.sigma_a2) * slot_sum / (n * n)
    return ConditionalMoments(base.cond_mean, base.cond_var + add)


def jump_exposure_sums(tree: YuleTree, jumps: JumpRealization,
                       alpha: float) -> tuple[float, float]:
    """Per-tree single-lineage and shared-pair jump exposure sums.

    single: sum over jumping slots of exp(-2 alpha age) d / n.
    pair:   sum over jumping slots of exp(-2 alpha age) d(d-1) / (n(n-1)).
    Their expectations are the closed forms jump_single_lineage_mean and
    jump_pair_shared_mean (for constant schedules).
    """
    n = tree.n
    if n < 2:
        return 0.0, 0.0
    decay = np.exp(-2.0 * alpha * tree.coalescence_ages)
    d = tree.daughter_counts.astype(np.float64)
    flagged_d = (jumps.flags * d).sum(axis=1)
    flagged_dd1 = (jumps.flags * (d * (d - 1.0))).sum(axis=1)
    single = float(np.dot(flagged_d, decay)) / n
    pair = float(np.dot(flagged_dd1, decay)) / (n * (n - 1.0))
    return single, pair


def sample_ybar(tree: YuleTree, params: YouParams, rng: np.random.Generator,
                jumps: JumpRealization | None = None) -> float:
    """One draw of the normalized tip average from its exact conditional
    normal distribution."""
    if jumps is None:
        m = conditional_moments_you(tree, params)
    else:
        m = conditional_moments_youj(tree, jumps, params)
    return float(rng.normal(m.cond_mean, math.sqrt(m.cond_var)))


def dump_tree(tree: YuleTree, jumps: JumpRealization | None = None) -> str:
    """Debug dump, one line per period: `index  duration  split  jumpflags`.

    Lines 1..n-1 describe speciation events (split is the 1-based index of
    the splitting lineage; jumpflags is a two-character 0/1 mask for the two
    daughter slots, or `-` when no jump realization is given). Line n is the
    final, eventless period and carries `-` placeholders.
    """
    lines = []
    for k in range(1, tree.n):
        if jumps is None:
            flag_text = "-"
        else:
            f = jumps.flags[k - 1]
            flag_text = f"{int(f[0])}{int(f[1])}"
        lines.append(f"{k}\t{tree.times[k - 1]:.17g}\t{int(tree.splits[k - 1]) + 1}\t{flag_text}")
    lines.append(f"{tree.n}\t{tree.times[-1]:.17g}\t-\t-")
    return "\n".join(lines) + "\n"
