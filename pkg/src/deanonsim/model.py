"""Core domain types shared by the generator, channels, attacker and bounds.

Everything here is immutable after construction (numpy buffers are marked
read-only), so instances can be shared freely across parallel workers.
Random streams are always passed in explicitly and never stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class GrowthModel(Enum):
    """How group popularity evolves while the membership graph grows."""

    ALPHA_PA = "alpha_pa"  # popularity = size**alpha + initial, alpha in (0, 1]
    SB = "sb"              # popularity frozen at the initial community values
    IEE = "iee"            # SB with all initial popularities equal


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GenerationParams:
    """Parameters of the edge-by-edge growth process.

    ``delta`` (total edges, mu * n) and ``beta`` (m / n) are derived, never
    passed in. ``tau0`` holds the initial group popularities; for ALPHA_PA
    they must all be 1, for IEE all equal, for SB they must come from a
    small finite set of values (the group communities).
    """

    n: int
    m: int
    mu: int
    alpha: float
    model: GrowthModel
    tau0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need at least one group and one user")
        if not (isinstance(self.mu, int) and self.mu >= 1):
            raise ValueError(f"mu must be an integer >= 1, got {self.mu!r}")
        tau0 = self.tau0
        if tau0 is None:
            tau0 = np.ones(self.n)
        tau0 = _readonly(np.asarray(tau0, dtype=float).copy())
        object.__setattr__(self, "tau0", tau0)
        if tau0.shape != (self.n,):
            raise ValueError(f"tau0 must have length n={self.n}")
        if not np.all(tau0 > 0):
            raise ValueError("initial popularities must be positive")
        if self.model is GrowthModel.ALPHA_PA:
            if not (0.0 < self.alpha <= 1.0):
                raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
            if not np.all(tau0 == 1.0):
                raise ValueError("ALPHA_PA requires all initial popularities equal to 1")
        else:
            # SB/IEE are the alpha -> 0 limit; alpha is recorded as 0.
            if self.alpha != 0.0:
                raise ValueError("SB/IEE models use alpha = 0")
            if self.model is GrowthModel.IEE and len(set(tau0.tolist())) != 1:
                raise ValueError("IEE requires all initial popularities equal")

    @property
    def delta(self) -> int:
        """Total number of growth steps (= target edge count)."""
        return self.mu * self.n

    @property
    def beta(self) -> float:
        """User-to-group ratio m / n."""
        return self.m / self.n

    def communities(self) -> dict[float, int]:
        """Distinct initial popularity values -> number of groups carrying them."""
        values, counts = np.unique(self.tau0, return_counts=True)
        return {float(v): int(c) for v, c in zip(values, counts)}


class BipartiteGraph:
    """User-group membership graph, dual-indexed.

    Stores both per-group member lists and per-user group lists (sorted
    numpy index arrays) so that the attacker can project user rows and the
    generator/scanner can walk group columns without transposing. Used for
    the ground truth and for the noisy scanned observation alike.
    """

    __slots__ = ("num_users", "num_groups", "group_members", "user_groups",
                 "group_sizes", "total_edges")

    def __init__(self, num_users: int, num_groups: int,
                 group_members: list[np.ndarray], user_groups: list[np.ndarray]):
        self.num_users = num_users
        self.num_groups = num_groups
        self.group_members = group_members
        self.user_groups = user_groups
        self.group_sizes = _readonly(np.array([len(g) for g in group_members], dtype=np.int64))
        self.total_edges = int(self.group_sizes.sum())

    @classmethod
    def from_user_groups(cls, user_groups: Sequence[Iterable[int]], num_groups: int) -> "BipartiteGraph":
        """Build from per-user group lists, deriving the group-side index."""
        num_users = len(user_groups)
        buckets: list[list[int]] = [[] for _ in range(num_groups)]
        rows: list[np.ndarray] = []
        for k, groups in enumerate(user_groups):
            row = np.array(sorted(set(int(j) for j in groups)), dtype=np.int64)
            if len(row) and (row[0] < 0 or row[-1] >= num_groups):
                raise ValueError(f"user {k} has a group index outside [0, {num_groups})")
            rows.append(_readonly(row))
            for j in row:
                buckets[j].append(k)
        members = [_readonly(np.array(b, dtype=np.int64)) for b in buckets]
        return cls(num_users, num_groups, members, rows)

    @classmethod
    def from_group_members(cls, group_members: Sequence[Iterable[int]], num_users: int) -> "BipartiteGraph":
        """Build from per-group member lists, deriving the user-side index."""
        num_groups = len(group_members)
        buckets: list[list[int]] = [[] for _ in range(num_users)]
        cols: list[np.ndarray] = []
        for j, users in enumerate(group_members):
            col = np.array(sorted(set(int(k) for k in users)), dtype=np.int64)
            if len(col) and (col[0] < 0 or col[-1] >= num_users):
                raise ValueError(f"group {j} has a user index outside [0, {num_users})")
            cols.append(_readonly(col))
            for k in col:
                buckets[k].append(j)
        rows = [_readonly(np.array(b, dtype=np.int64)) for b in buckets]
        return cls(num_users, num_groups, cols, rows)

    def has_edge(self, k: int, j: int) -> bool:
        row = self.user_groups[k]
        i = np.searchsorted(row, j)
        return bool(i < len(row) and row[i] == j)

    def membership_column(self, j: int) -> np.ndarray:
        """Indicator vector over all users for group ``j``."""
        col = np.zeros(self.num_users, dtype=np.uint8)
        col[self.group_members[j]] = 1
        return col

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset((int(k), int(j))
                         for k in range(self.num_users)
                         for j in self.user_groups[k])

    def validate(self) -> None:
        """Check the dual-index invariants; raises AssertionError on corruption."""
        edge_count = 0
        for j, members in enumerate(self.group_members):
            assert len(np.unique(members)) == len(members), f"group {j} has duplicate members"
            assert np.all(np.diff(members) > 0) or len(members) <= 1, f"group {j} not sorted"
            assert self.group_sizes[j] == len(members)
            edge_count += len(members)
            for k in members:
                assert self.has_edge(int(k), j), f"edge ({k},{j}) missing from user index"
        assert edge_count == self.total_edges
        assert sum(len(r) for r in self.user_groups) == edge_count


def fingerprint(graph: BipartiteGraph, user: int, indices: Sequence[int] | None = None) -> np.ndarray:
    """Binary membership indicators of ``user`` over ``indices`` (all groups if None)."""
    if not (0 <= user < graph.num_users):
        raise IndexError(f"user index {user} out of range")
    row = graph.user_groups[user]
    if indices is None:
        out = np.zeros(graph.num_groups, dtype=np.uint8)
        out[row] = 1
        return out
    idx = np.asarray(list(indices), dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= graph.num_groups):
        raise IndexError("group index out of range")
    pos = np.searchsorted(row, idx)
    pos = np.minimum(pos, max(len(row) - 1, 0))
    if len(row) == 0:
        return np.zeros(len(idx), dtype=np.uint8)
    return (row[pos] == idx).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class BinaryChannel:
    """A 2x2 row-stochastic transition matrix ``p[input, output]``."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).copy()
        if p.shape != (2, 2):
            raise ValueError("binary channel needs a 2x2 matrix")
        if np.any(p < 0):
            raise ValueError("channel probabilities must be nonnegative")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("channel rows must sum to 1 within 1e-12")
        object.__setattr__(self, "p", _readonly(p))

    def __getitem__(self, key):
        return self.p[key]

    def row(self, bit: int) -> np.ndarray:
        return self.p[bit]


class VictimKind(Enum):
    UNIFORM = "uniform"
    ZIPF_NORMALIZED = "zipf"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class VictimDistribution:
    """Distribution of the victim index: P(k) = c_k / m with sum(c) = m.

    ``lambda_cap`` is a recorded upper bound on the weights; it is only
    validated here, never consumed by any computation.
    """

    c: np.ndarray
    lambda_cap: float
    kind: VictimKind
    _cumulative: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).copy()
        if c.ndim != 1 or len(c) < 1:
            raise ValueError("weight vector must be 1-D and nonempty")
        if np.any(c < 0):
            raise ValueError("weights must be nonnegative")
        m = len(c)
        if abs(c.sum() - m) > 1e-9:
            raise ValueError(f"weights must sum to m={m} within 1e-9, got {c.sum()}")
        if not c.max() < self.lambda_cap:
            raise ValueError("lambda_cap must strictly exceed every weight")
        object.__setattr__(self, "c", _readonly(c))
        object.__setattr__(self, "_cumulative", _readonly(np.cumsum(c / m)))

    @property
    def m(self) -> int:
        return len(self.c)

    def probabilities(self) -> np.ndarray:
        return self.c / self.m

    @classmethod
    def uniform(cls, m: int) -> "VictimDistribution":
        return cls(np.ones(m), lambda_cap=2.0, kind=VictimKind.UNIFORM)

    @classmethod
    def zipf(cls, m: int, exponent: float = 1.0) -> "VictimDistribution":
        w = 1.0 / np.arange(1, m + 1, dtype=float) ** exponent
        c = w * (m / w.sum())
        return cls(c, lambda_cap=c.max() + 1.0, kind=VictimKind.ZIPF_NORMALIZED)

    @classmethod
    def custom(cls, c: Sequence[float], lambda_cap: float | None = None) -> "VictimDistribution":
        c = np.asarray(c, dtype=float)
        if lambda_cap is None:
            lambda_cap = float(c.max()) + 1.0
        return cls(c, lambda_cap=lambda_cap, kind=VictimKind.CUSTOM)


def sample_victim(dist: VictimDistribution, rng: np.random.Generator) -> int:
    """Draw a user index k with probability c_k / m."""
    u = rng.random()
    k = int(np.searchsorted(dist._cumulative, u, side="right"))
    return min(k, dist.m - 1)


class NoiseModel:
    """Per-user channel assignment for scanning and querying.

    The attacker is assumed to know each victim's query channel (it can
    probe device/software characteristics) but never a user's scan channel
    (privacy preferences are hidden); it only knows the finite family of
    possible scan channels.
    """

    attacker_knows_theta = True
    attacker_knows_gamma = False

    __slots__ = ("gamma_channels", "theta_channels", "gamma_of_user", "theta_of_user")

    def __init__(self, gamma_channels: dict[str, BinaryChannel],
                 theta_channels: dict[str, BinaryChannel],
                 gamma_of_user: Sequence[str], theta_of_user: Sequence[str]):
        if not gamma_channels or not theta_channels:
            raise ValueError("channel families must be nonempty")
        for label in gamma_of_user:
            if label not in gamma_channels:
                raise ValueError(f"unknown scan channel label {label!r}")
        for label in theta_of_user:
            if label not in theta_channels:
                raise ValueError(f"unknown query channel label {label!r}")
        if len(gamma_of_user) != len(theta_of_user):
            raise ValueError("per-user label vectors must have equal length")
        self.gamma_channels = dict(gamma_channels)
        self.theta_channels = dict(theta_channels)
        self.gamma_of_user = tuple(gamma_of_user)
        self.theta_of_user = tuple(theta_of_user)

    @property
    def num_users(self) -> int:
        return len(self.gamma_of_user)

    def gamma_channel_of(self, k: int) -> BinaryChannel:
        return self.gamma_channels[self.gamma_of_user[k]]

    def theta_channel_of(self, k: int) -> BinaryChannel:
        return self.theta_channels[self.theta_of_user[k]]

    def joint_label_weights(self) -> dict[tuple[str, str], float]:
        """Empirical joint frequency of (scan label, query label) over users."""
        m = self.num_users
        weights: dict[tuple[str, str], float] = {}
        for g, t in zip(self.gamma_of_user, self.theta_of_user):
            weights[(g, t)] = weights.get((g, t), 0.0) + 1.0 / m
        return weights

    @classmethod
    def homogeneous(cls, m: int, scan: BinaryChannel, query: BinaryChannel) -> "NoiseModel":
        return cls({"g0": scan}, {"t0": query}, ("g0",) * m, ("t0",) * m)

    @classmethod
    def round_robin(cls, m: int, gamma_channels: dict[str, BinaryChannel],
                    theta_channels: dict[str, BinaryChannel]) -> "NoiseModel":
        g_labels = sorted(gamma_channels)
        t_labels = sorted(theta_channels)
        gamma = tuple(g_labels[k % len(g_labels)] for k in range(m))
        theta = tuple(t_labels[k % len(t_labels)] for k in range(m))
        return cls(gamma_channels, theta_channels, gamma, theta)

    @classmethod
    def random_assignment(cls, m: int, gamma_channels: dict[str, BinaryChannel],
                          theta_channels: dict[str, BinaryChannel],
                          rng: np.random.Generator) -> "NoiseModel":
        g_labels = sorted(gamma_channels)
        t_labels = sorted(theta_channels)
        gamma = tuple(g_labels[i] for i in rng.integers(0, len(g_labels), m))
        theta = tuple(t_labels[i] for i in rng.integers(0, len(t_labels), m))
        return cls(gamma_channels, theta_channels, gamma, theta)


@dataclass(frozen=True)
class AttackOutcome:
    """Result of one attack run: who was named, after how many queries."""

    identified: int | None
    victim: int
    num_queries: int
    transcript: tuple[tuple[int, int], ...]  # (group index, response bit) per query
    correct: bool
    exhausted: bool

    def __post_init__(self):
        if self.num_queries != len(self.transcript):
            raise ValueError("query count must match transcript length")
        if self.correct and self.identified is None:
            raise ValueError("a correct outcome must name a user")
        if self.correct != (self.identified == self.victim):
            raise ValueError("correctness flag inconsistent with identified/victim")


def entropy_nats(probs: np.ndarray) -> float:
    """Shannon entropy in nats with the 0 * ln 0 = 0 convention."""
    p = np.asarray(probs, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)
