"""The information-threshold attack.

Each query asks whether the victim belongs to one group. Every user k keeps
a running information value: the cumulative log-likelihood ratio between
"the responses were generated by user k's scanned fingerprint" and "the
responses are independent noise", seeded with ln P(victim = k). The attack
stops at the first time exactly one user's value exceeds ln(1/epsilon).

Three variants:

* NOISELESS_QUERY  - single scan channel, responses trusted as true bits.
* SB_COMMUNITY     - block-model graphs; groups are queried in order of
                     decreasing community popularity and the per-community
                     edge prior replaces the global one.
* COMPOUND         - unknown per-user scan channel out of a finite family
                     plus a known noisy query channel; one cumulative sum is
                     kept per candidate scan channel and the maximum counts
                     (the compound-channel decoding trick).

A note on the compound composition: the scanned bit F and the response Y
are two independent observations of the same true bit E, F through the
candidate scan channel (the unknown, maximized-over index) and Y through
the victim's known query channel. The per-query weight of evidence is
ln P(Y=y | F=f) - ln P(Y=y), where P(Y|F) chains the Bayes-inverted scan
channel with the query channel. The output marginal P(Y) depends only on
the query channel (total probability), so it is shared by all candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channels import query_response
from .model import AttackOutcome, BinaryChannel, BipartiteGraph, NoiseModel, VictimDistribution

_NEG_INF = float("-inf")


class AttackDiagnostic(RuntimeError):
    """The observed data is impossible under the attacker's channel model."""


class Variant(Enum):
    NOISELESS_QUERY = "t1"
    SB_COMMUNITY = "t2"
    COMPOUND = "t3"


class QueryOrder(Enum):
    INDEX_ORDER = "index"
    COMMUNITY_POPULARITY_DESC = "community_desc"


@dataclass(frozen=True)
class ItsConfig:
    epsilon: float
    variant: Variant = Variant.NOISELESS_QUERY
    query_order: QueryOrder | None = None
    min_queries_floor: int = 0
    max_queries: int | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must be in (0, 1)")
        if self.min_queries_floor < 0:
            raise ValueError("min_queries_floor must be nonnegative")
        order = self.query_order
        if self.variant is Variant.SB_COMMUNITY:
            if order is None:
                order = QueryOrder.COMMUNITY_POPULARITY_DESC
            elif order is not QueryOrder.COMMUNITY_POPULARITY_DESC:
                raise ValueError("the block-model variant queries communities in popularity order")
        elif order is None:
            order = QueryOrder.INDEX_ORDER
        object.__setattr__(self, "query_order", order)

    @property
    def threshold(self) -> float:
        return math.log(1.0 / self.epsilon)


class InformationState:
    """Running information values for all users.

    ``cumulative`` is (m,) for the single-channel variants and (m, |Gamma|)
    for the compound one. Eliminated entries (log-likelihood hit -inf) are
    tracked by a mask and never touched by further arithmetic.
    """

    def __init__(self, info0: np.ndarray, num_gammas: int | None = None):
        info0 = np.asarray(info0, dtype=float)
        self.info0 = info0
        self.m = len(info0)
        self.t = 0
        if num_gammas is None:
            self.cumulative = np.zeros(self.m)
            self.eliminated = ~np.isfinite(info0)
            self.cumulative[self.eliminated] = _NEG_INF
        else:
            self.cumulative = np.zeros((self.m, num_gammas))
            self.eliminated = np.zeros((self.m, num_gammas), dtype=bool)
            self.eliminated[~np.isfinite(info0), :] = True
            self.cumulative[self.eliminated] = _NEG_INF

    @classmethod
    def initial(cls, dist: VictimDistribution, num_gammas: int | None = None) -> "InformationState":
        with np.errstate(divide="ignore"):
            info0 = np.log(dist.probabilities())
        return cls(info0, num_gammas)

    @property
    def compound(self) -> bool:
        return self.cumulative.ndim == 2

    def user_eliminated(self) -> np.ndarray:
        if self.compound:
            return self.eliminated.all(axis=1)
        return self.eliminated

    def information_values(self) -> np.ndarray:
        """I_t(k) for every user; -inf for eliminated users."""
        if self.compound:
            best = np.where(self.eliminated, _NEG_INF, self.cumulative).max(axis=1)
        else:
            best = np.where(self.eliminated, _NEG_INF, self.cumulative)
        return best + self.info0


@dataclass(frozen=True)
class IncrementTable:
    """Per-query log-likelihood increments.

    ``log_ratio[f, y]`` is the information gained by a user whose scanned
    bit is f when the response is y (-inf eliminates). ``impossible_obs[f]``
    marks scanned symbols the channel model says cannot occur;
    ``impossible_resp[y]`` marks responses with zero model probability.
    """

    log_ratio: np.ndarray
    impossible_obs: np.ndarray
    impossible_resp: np.ndarray


def _bayes_rows(p1: float, channel: BinaryChannel) -> tuple[np.ndarray, np.ndarray]:
    """rows[f, s] = P(input=s | output=f); flags outputs of zero probability."""
    prior = np.array([1.0 - p1, p1])
    joint = prior[:, None] * channel.p  # joint[s, f]
    marg = joint.sum(axis=0)
    impossible = marg <= 0.0
    rows = np.zeros((2, 2))
    for f in range(2):
        if not impossible[f]:
            rows[f] = joint[:, f] / marg[f]
    return rows, impossible


def _log_ratio_table(cond: np.ndarray, marginal: np.ndarray,
                     impossible_obs: np.ndarray) -> IncrementTable:
    table = np.full((2, 2), _NEG_INF)
    impossible_resp = marginal <= 0.0
    for f in range(2):
        if impossible_obs[f]:
            continue
        for y in range(2):
            if cond[f, y] > 0.0 and marginal[y] > 0.0:
                table[f, y] = math.log(cond[f, y] / marginal[y])
    return IncrementTable(table, impossible_obs, impossible_resp)


def build_noiseless_query_table(p1: float, scan_channel: BinaryChannel) -> IncrementTable:
    """Increments ln(P(E=y|F=f) / P(E=y)) for trusted responses."""
    rows, impossible = _bayes_rows(p1, scan_channel)
    prior = np.array([1.0 - p1, p1])
    return _log_ratio_table(rows, prior, impossible)


def build_compound_tables(p1: float, gamma_channels: list[BinaryChannel],
                          theta_channel: BinaryChannel) -> list[IncrementTable]:
    """One increment table per candidate scan channel, through the query channel.

    cond[f, y] = sum_s P(E=s | F=f; gamma) * P(Y=y | E=s; theta); the
    response marginal P(Y) is candidate-independent.
    """
    prior = np.array([1.0 - p1, p1])
    marginal = prior @ theta_channel.p
    tables = []
    for scan in gamma_channels:
        rows, impossible = _bayes_rows(p1, scan)
        cond = rows @ theta_channel.p
        tables.append(_log_ratio_table(cond, marginal, impossible))
    return tables


@dataclass(frozen=True)
class CompoundTables:
    """The per-candidate increment tables stacked for vectorized updates."""

    log_ratio: np.ndarray        # (num_gammas, 2, 2)
    impossible_obs: np.ndarray   # (num_gammas, 2)
    impossible_resp: np.ndarray  # (num_gammas, 2)

    @classmethod
    def stack(cls, tables: list[IncrementTable]) -> "CompoundTables":
        return cls(np.stack([t.log_ratio for t in tables]),
                   np.stack([t.impossible_obs for t in tables]),
                   np.stack([t.impossible_resp for t in tables]))

    @property
    def num_gammas(self) -> int:
        return self.log_ratio.shape[0]


def community_edge_priors(tau0: np.ndarray, mu: float, m: int) -> dict[float, float]:
    """Per-community edge probability: tau-share of steps times edges per user.

    A group in the community with initial popularity tau is chosen each step
    with probability tau / sum(tau0), so its expected size is delta * that,
    and the chance a fixed user is a member is that size over m.
    """
    tau0 = np.asarray(tau0, dtype=float)
    weight = float(tau0.sum())
    n = len(tau0)
    delta = mu * n
    return {float(tau): float(tau) * delta / (weight * m) for tau in np.unique(tau0)}


def build_community_tables(tau0: np.ndarray, mu: float, m: int,
                           scan_channel: BinaryChannel) -> dict[float, IncrementTable]:
    priors = community_edge_priors(tau0, mu, m)
    return {tau: build_noiseless_query_table(p, scan_channel) for tau, p in priors.items()}


def community_query_order(tau0: np.ndarray) -> np.ndarray:
    """Groups sorted by community initial popularity descending, index ascending."""
    return np.argsort(-np.asarray(tau0, dtype=float), kind="stable")


def next_query(config: ItsConfig, n: int, t: int, communities: np.ndarray | None = None) -> int:
    """Index of the group to query at time t (0-based); a permutation over t."""
    if not (0 <= t < n):
        raise IndexError(f"query index {t} out of range [0, {n})")
    if config.query_order is QueryOrder.INDEX_ORDER:
        return t
    if communities is None:
        raise ValueError("community order needs the per-group initial popularities")
    return int(community_query_order(communities)[t])


def _apply_single(state: InformationState, f_bits: np.ndarray, y: int,
                  table: IncrementTable) -> None:
    if table.impossible_resp[y]:
        raise AttackDiagnostic(f"response {y} has zero probability under the channel model")
    alive = ~state.eliminated
    if np.any(table.impossible_obs[f_bits[alive]]):
        raise AttackDiagnostic("scanned symbol impossible under the channel model")
    inc = table.log_ratio[f_bits.astype(np.int64), y]
    dead = alive & (inc == _NEG_INF)
    grow = alive & ~dead
    state.cumulative[grow] += inc[grow]
    state.cumulative[dead] = _NEG_INF
    state.eliminated |= dead


def info_update_t1(state: InformationState, f_bits: np.ndarray, y: int,
                   p1: float, scan_channel: BinaryChannel) -> InformationState:
    """One query's worth of updates for the trusted-response variant."""
    _apply_single(state, f_bits, y, build_noiseless_query_table(p1, scan_channel))
    state.t += 1
    return state


def info_update_t2(state: InformationState, f_bits: np.ndarray, y: int,
                   group_tau: float, tables: dict[float, IncrementTable]) -> InformationState:
    """Same as t1 but the prior is the queried group's community edge prior."""
    _apply_single(state, f_bits, y, tables[float(group_tau)])
    state.t += 1
    return state


def _apply_compound(state: InformationState, f_bits: np.ndarray, y: int,
                    stacked: CompoundTables) -> None:
    if stacked.impossible_resp[:, y].any():
        raise AttackDiagnostic(f"response {y} has zero probability under the channel model")
    f_idx = f_bits.astype(np.int64)
    # A scanned symbol that is impossible under a candidate only kills that
    # candidate's hypothesis for the user, not the whole attack.
    inc = np.where(stacked.impossible_obs[:, f_idx], _NEG_INF,
                   stacked.log_ratio[:, f_idx, y]).T  # (m, num_gammas)
    alive = ~state.eliminated
    dead = alive & (inc == _NEG_INF)
    grow = alive & ~dead
    state.cumulative[grow] += inc[grow]
    state.cumulative[dead] = _NEG_INF
    state.eliminated |= dead


def info_update_t3(state: InformationState, f_bits: np.ndarray, y: int, p1: float,
                   gamma_channels: list[BinaryChannel],
                   theta_channel: BinaryChannel) -> InformationState:
    """One query's worth of updates for the compound-noise variant."""
    tables = build_compound_tables(p1, gamma_channels, theta_channel)
    _apply_compound(state, f_bits, y, CompoundTables.stack(tables))
    state.t += 1
    return state


def identify(state: InformationState, epsilon: float, min_queries_floor: int = 0) -> int | None:
    """The unique user above ln(1/epsilon), or None to continue querying."""
    if state.t < min_queries_floor:
        return None
    values = state.information_values()
    above = np.nonzero(values > math.log(1.0 / epsilon))[0]
    if len(above) == 1:
        return int(above[0])
    return None


def run_attack(truth: BipartiteGraph, scanned: BipartiteGraph, victim: int,
               noise: NoiseModel, config: ItsConfig, dist: VictimDistribution,
               rng: np.random.Generator, mu: float | None = None,
               communities: np.ndarray | None = None) -> AttackOutcome:
    """Query / update / identify until a unique crossing or the group supply ends.

    Responses are drawn from the victim's true fingerprint through its query
    channel; scanned bits come from ``scanned``. ``mu`` (mean group size)
    sets the attacker's edge prior mu/m and defaults to edges/n of the
    truth. ``communities`` carries per-group initial popularities for the
    block-model variant.
    """
    m, n = truth.num_users, truth.num_groups
    if scanned.num_users != m or scanned.num_groups != n:
        raise ValueError("scanned graph dimensions do not match the ground truth")
    if dist.m != m:
        raise ValueError("victim distribution sized for a different user set")
    if not (0 <= victim < m):
        raise IndexError("victim index out of range")
    if mu is None:
        mu = truth.total_edges / n
    p1 = mu / m
    theta_ch = noise.theta_channel_of(victim)

    variant = config.variant
    if variant is Variant.NOISELESS_QUERY:
        tables_single = build_noiseless_query_table(p1, noise.gamma_channel_of(victim))
        state = InformationState.initial(dist)
    elif variant is Variant.SB_COMMUNITY:
        if communities is None:
            raise ValueError("the block-model variant needs per-group communities")
        tables_by_tau = build_community_tables(communities, mu, m, noise.gamma_channel_of(victim))
        state = InformationState.initial(dist)
    else:
        gamma_list = [noise.gamma_channels[label] for label in sorted(noise.gamma_channels)]
        tables_compound = CompoundTables.stack(build_compound_tables(p1, gamma_list, theta_ch))
        state = InformationState.initial(dist, num_gammas=len(gamma_list))

    if config.query_order is QueryOrder.COMMUNITY_POPULARITY_DESC:
        if communities is None:
            raise ValueError("community order needs per-group communities")
        order = community_query_order(communities)
    else:
        order = np.arange(n)

    victim_groups = set(int(j) for j in truth.user_groups[victim])
    max_queries = n if config.max_queries is None else min(config.max_queries, n)
    transcript: list[tuple[int, int]] = []

    for t in range(max_queries):
        j = int(order[t])
        true_bit = 1 if j in victim_groups else 0
        y = query_response(true_bit, theta_ch, rng)
        f_col = scanned.membership_column(j)
        if variant is Variant.NOISELESS_QUERY:
            _apply_single(state, f_col, y, tables_single)
        elif variant is Variant.SB_COMMUNITY:
            _apply_single(state, f_col, y, tables_by_tau[float(communities[j])])
        else:
            _apply_compound(state, f_col, y, tables_compound)
        state.t += 1
        transcript.append((j, y))
        winner = identify(state, config.epsilon, config.min_queries_floor)
        if winner is not None:
            return AttackOutcome(identified=winner, victim=victim,
                                 num_queries=state.t, transcript=tuple(transcript),
                                 correct=(winner == victim), exhausted=False)

    return AttackOutcome(identified=None, victim=victim, num_queries=state.t,
                         transcript=tuple(transcript), correct=False, exhausted=True)
