"""Ground-truth graph generation.

The graph grows one edge per step: a group is drawn proportionally to its
current popularity, a user is drawn uniformly among non-members, and the
chosen group's popularity becomes size**alpha + initial (SB/IEE popularities
never move). A prefix-sum (Fenwick) tree keeps the weighted group draw and
the point update at O(log n) per step, which is what makes the
mu*n-step process linear-ish overall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import BipartiteGraph, GenerationParams, GrowthModel

_CHUNK = 1 << 15  # batched RNG draws; element access on python lists is cheap
_BRUTE_FORCE_BUDGET = 1_000_000


class PrefixSumTree:
    """Fenwick tree over nonnegative float weights.

    Supports O(log n) point increments, prefix sums, and inverse-CDF
    sampling (find the first index whose prefix sum exceeds a target).
    """

    __slots__ = ("n", "tree", "_top_bit")

    def __init__(self, weights):
        n = len(weights)
        self.n = n
        tree = [0.0] * (n + 1)
        for i, w in enumerate(weights, start=1):
            if w < 0:
                raise ValueError("weights must be nonnegative")
            tree[i] += w
            parent = i + (i & -i)
            if parent <= n:
                tree[parent] += tree[i]
        self.tree = tree
        self._top_bit = 1 << (n.bit_length() - 1) if n else 0

    def add(self, index: int, delta: float) -> None:
        i = index + 1
        tree = self.tree
        n = self.n
        while i <= n:
            tree[i] += delta
            i += i & -i

    def prefix_sum(self, count: int) -> float:
        """Sum of the first ``count`` weights."""
        s = 0.0
        i = count
        tree = self.tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def total(self) -> float:
        return self.prefix_sum(self.n)

    def get(self, index: int) -> float:
        return self.prefix_sum(index + 1) - self.prefix_sum(index)

    def sample(self, target: float) -> int:
        """First index i with prefix_sum(i+1) > target (target in [0, total))."""
        idx = 0
        bit = self._top_bit
        tree = self.tree
        n = self.n
        while bit:
            nxt = idx + bit
            if nxt <= n and tree[nxt] <= target:
                idx = nxt
                target -= tree[nxt]
            bit >>= 1
        return min(idx, n - 1)


@dataclass
class PopularityState:
    """Current popularity vector plus its prefix-sum tree."""

    tau: list[float]
    tau0: np.ndarray
    tree: PrefixSumTree = field(init=False)

    def __post_init__(self):
        self.tree = PrefixSumTree(self.tau)

    @classmethod
    def initial(cls, params: GenerationParams) -> "PopularityState":
        return cls(tau=[float(t) for t in params.tau0], tau0=params.tau0)

    @property
    def total(self) -> float:
        return self.tree.total()

    def set_popularity(self, j: int, value: float) -> None:
        self.tree.add(j, value - self.tau[j])
        self.tau[j] = value


def selection_probability(state: PopularityState, group: int) -> float:
    """Probability that ``group`` attracts the next edge."""
    return state.tau[group] / state.total


def popularity_update(tau_prev: float, tau0: float, new_size: int, alpha: float) -> float:
    """Popularity of the chosen group after it reaches ``new_size`` members.

    For the growth models with alpha in (0, 1] this is new_size**alpha + tau0
    (equivalently one application of f(x, y) = ((x-y)**(1/alpha) + 1)**alpha + y
    to the previous value, written in the numerically exact size form). The
    alpha -> 0 block models leave popularity untouched.
    """
    if new_size < 0:
        raise ValueError("group size cannot be negative")
    if alpha == 0.0:
        return tau_prev
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return float(new_size) ** alpha + tau0


@dataclass(frozen=True)
class GenerationResult:
    graph: BipartiteGraph
    skips: tuple[int, ...]  # step indices (1-based) where the chosen group was full

    @property
    def num_skips(self) -> int:
        return len(self.skips)


def generate_ground_truth(params: GenerationParams, rng: np.random.Generator) -> GenerationResult:
    """Run the full delta-step growth process and return the final graph.

    If the chosen group already contains every user, no edge is added for
    that step (the step is recorded as a skip) and the process moves on, so
    edges + skips == delta always holds.
    """
    n, m, delta = params.n, params.m, params.delta
    alpha = params.alpha
    is_pa = params.model is GrowthModel.ALPHA_PA

    tau0 = params.tau0
    tau = [float(t) for t in tau0]
    tree = PrefixSumTree(tau)
    total = tree.total()

    sizes = [0] * n
    member_sets: list[set[int]] = [set() for _ in range(n)]
    members: list[list[int]] = [[] for _ in range(n)]
    user_rows: list[list[int]] = [[] for _ in range(m)]
    skips: list[int] = []

    if not is_pa:
        # Popularities are frozen: group draws are i.i.d., so batch them.
        probs = np.asarray(tau) / total
        cum = np.cumsum(probs)
        group_seq = np.searchsorted(cum, rng.random(delta), side="right")
        group_seq = np.minimum(group_seq, n - 1).tolist()

    chunk = min(_CHUNK, max(64, delta + delta // 4))
    uniforms: list[float] = []
    u_at = 0
    user_draws: list[int] = []
    k_at = 0
    half_m = m // 2

    for t in range(1, delta + 1):
        if is_pa:
            if u_at == len(uniforms):
                uniforms = rng.random(chunk).tolist()
                u_at = 0
            j = tree.sample(uniforms[u_at] * total)
            u_at += 1
        else:
            j = group_seq[t - 1]

        size = sizes[j]
        if size == m:
            # Full group: no edge this step; the popularity refresh is a
            # no-op because the size did not change.
            skips.append(t)
            continue

        mem = member_sets[j]
        if size <= half_m:
            while True:
                if k_at == len(user_draws):
                    user_draws = rng.integers(0, m, chunk).tolist()
                    k_at = 0
                k = user_draws[k_at]
                k_at += 1
                if k not in mem:
                    break
        else:
            # Dense group: rejection would stall, draw from the complement.
            candidates = [u for u in range(m) if u not in mem]
            if u_at == len(uniforms):
                uniforms = rng.random(chunk).tolist()
                u_at = 0
            k = candidates[int(uniforms[u_at] * len(candidates))]
            u_at += 1

        mem.add(k)
        members[j].append(k)
        user_rows[k].append(j)
        new_size = size + 1
        sizes[j] = new_size

        if is_pa:
            new_tau = float(new_size) ** alpha + tau0[j]
            delta_tau = new_tau - tau[j]
            tree.add(j, delta_tau)
            total += delta_tau
            tau[j] = new_tau

    group_arrays = [np.array(sorted(g), dtype=np.int64) for g in members]
    graph = BipartiteGraph.from_group_members(group_arrays, m)
    return GenerationResult(graph=graph, skips=tuple(skips))


def brute_force_generation_distribution(params: GenerationParams) -> dict[frozenset, float]:
    """Exact distribution over final edge sets by enumerating every trajectory.

    Kept deliberately independent of the sampling machinery above: selection
    probabilities and popularity values are recomputed inline from their
    definitions. Only instances with (n*m)**delta within the enumeration
    budget are accepted.
    """
    n, m, delta = params.n, params.m, params.delta
    if (n * m) ** delta > _BRUTE_FORCE_BUDGET:
        raise ValueError("instance exceeds the brute-force enumeration budget")
    alpha = params.alpha
    is_pa = params.model is GrowthModel.ALPHA_PA
    tau0 = tuple(float(t) for t in params.tau0)

    out: dict[frozenset, float] = {}

    def recurse(step: int, tau: tuple[float, ...], groups: tuple[frozenset, ...], prob: float):
        if step > delta:
            edges = frozenset((k, j) for j in range(n) for k in groups[j])
            out[edges] = out.get(edges, 0.0) + prob
            return
        total = sum(tau)
        for j in range(n):
            pj = tau[j] / total
            if pj == 0.0:
                continue
            size = len(groups[j])
            if size == m:
                recurse(step + 1, tau, groups, prob * pj)
                continue
            free = [k for k in range(m) if k not in groups[j]]
            if is_pa:
                new_tau = tau[:j] + ((size + 1) ** alpha + tau0[j],) + tau[j + 1:]
            else:
                new_tau = tau
            for k in free:
                new_groups = groups[:j] + (groups[j] | {k},) + groups[j + 1:]
                recurse(step + 1, new_tau, new_groups, prob * pj / len(free))

    recurse(1, tau0, tuple(frozenset() for _ in range(n)), 1.0)
    mass = sum(out.values())
    if abs(mass - 1.0) > 1e-9:
        raise AssertionError(f"trajectory probabilities sum to {mass}, not 1")
    return out


def empirical_edge_set_distribution(params: GenerationParams, runs: int,
                                    rng: np.random.Generator) -> dict[frozenset, float]:
    """Monte Carlo companion of the brute-force oracle (same key space)."""
    counts: dict[frozenset, int] = {}
    for _ in range(runs):
        result = generate_ground_truth(params, rng)
        edges = result.graph.edge_set()
        counts[edges] = counts.get(edges, 0) + 1
    return {k: v / runs for k, v in counts.items()}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
