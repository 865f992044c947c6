"""Binary noise channels: construction, composition, Bayes inversion and
the information functionals used by both the attacker and the bound
calculators.

All information quantities are in natural log units throughout the
package; the attacker's thresholds use the same base, so bound-vs-empirical
comparisons never mix units. Degenerate cases (zero-probability output
symbols, mismatched supports) surface as ``math.inf`` or a raised
``ZeroProbabilityOutput`` rather than being clamped: the corresponding
bounds are genuinely vacuous there.
"""

from __future__ import annotations

import math

import numpy as np

from .model import BinaryChannel, BipartiteGraph, NoiseModel


class ZeroProbabilityOutput(ValueError):
    """An output symbol has zero marginal probability; its posterior is undefined."""


# ---------------------------------------------------------------------------
# constructors


def bsc(crossover: float) -> BinaryChannel:
    """Binary symmetric channel: flips the input with probability ``crossover``."""
    if not (0.0 <= crossover <= 1.0):
        raise ValueError("crossover must be in [0, 1]")
    e = crossover
    return BinaryChannel(np.array([[1.0 - e, e], [e, 1.0 - e]]))


def omission(s: float) -> BinaryChannel:
    """Erasure-style channel: a true 1 survives with probability 1 - s, a 0 never flips."""
    if not (0.0 <= s <= 1.0):
        raise ValueError("omission probability must be in [0, 1]")
    return BinaryChannel(np.array([[1.0, 0.0], [s, 1.0 - s]]))


def identity_channel() -> BinaryChannel:
    return BinaryChannel(np.eye(2))


def constant_channel(p1: float = 0.5) -> BinaryChannel:
    """Output independent of input: both rows equal (1 - p1, p1)."""
    return BinaryChannel(np.array([[1.0 - p1, p1], [1.0 - p1, p1]]))


def mixture(w: float, a: BinaryChannel, b: BinaryChannel) -> BinaryChannel:
    """Convex combination w*a + (1-w)*b of two transition matrices."""
    if not (0.0 <= w <= 1.0):
        raise ValueError("mixture weight must be in [0, 1]")
    return BinaryChannel(w * a.p + (1.0 - w) * b.p)


# ---------------------------------------------------------------------------
# applying channels to data


def query_response(true_bit: int, channel: BinaryChannel, rng: np.random.Generator) -> int:
    """Draw one noisy response to a membership query with true answer ``true_bit``."""
    if true_bit not in (0, 1):
        raise ValueError("true_bit must be 0 or 1")
    return int(rng.random() < channel.p[true_bit, 1])


def scan_graph(truth: BipartiteGraph, noise: NoiseModel, rng: np.random.Generator) -> BipartiteGraph:
    """Pass every membership indicator through its user's scan channel.

    Each cell F[k, j] is drawn independently from the user's channel applied
    to the true indicator R[k, j]; vertex sets are unchanged. Channels with
    no false positives (P(1|0) = 0) only touch true edges; anything else
    draws the full row for the user.
    """
    if noise.num_users != truth.num_users:
        raise ValueError("noise model sized for a different user set")
    m, n = truth.num_users, truth.num_groups
    rows: list[np.ndarray] = []
    for k in range(m):
        ch = noise.gamma_channel_of(k)
        p11 = ch.p[1, 1]
        p01 = ch.p[0, 1]
        true_row = truth.user_groups[k]
        if p01 == 0.0:
            if p11 == 1.0:
                rows.append(true_row)
            else:
                keep = rng.random(len(true_row)) < p11
                rows.append(true_row[keep])
        else:
            scanned = rng.random(n) < p01
            scanned[true_row] = rng.random(len(true_row)) < p11
            rows.append(np.nonzero(scanned)[0].astype(np.int64))
    return BipartiteGraph.from_user_groups(rows, n)


# ---------------------------------------------------------------------------
# information functionals


def output_marginal(p1: float, channel: BinaryChannel) -> np.ndarray:
    """Distribution of the channel output when the input is Bernoulli(p1)."""
    prior = np.array([1.0 - p1, p1])
    return prior @ channel.p


def posterior(p1: float, channel: BinaryChannel) -> BinaryChannel:
    """Bayes-invert a channel: returns q with q[out, in] = P(in | out).

    The result is itself a BinaryChannel whose input alphabet is the forward
    channel's output. Raises ZeroProbabilityOutput if some output symbol can
    never occur, because its posterior row is undefined.
    """
    if not (0.0 < p1 < 1.0):
        raise ValueError("prior must be strictly inside (0, 1)")
    prior = np.array([1.0 - p1, p1])
    joint = prior[:, None] * channel.p  # joint[in, out]
    marg = joint.sum(axis=0)
    if np.any(marg <= 0.0):
        bad = int(np.nonzero(marg <= 0.0)[0][0])
        raise ZeroProbabilityOutput(f"output symbol {bad} has zero probability")
    return BinaryChannel((joint / marg).T)


def mutual_information(p1: float, channel: BinaryChannel) -> float:
    """I(input; output) in nats for a Bernoulli(p1) input."""
    if not (0.0 <= p1 <= 1.0):
        raise ValueError("prior must be in [0, 1]")
    prior = np.array([1.0 - p1, p1])
    joint = prior[:, None] * channel.p
    marg = joint.sum(axis=0)
    total = 0.0
    for x in range(2):
        for y in range(2):
            pxy = joint[x, y]
            if pxy > 0.0:
                total += pxy * math.log(pxy / (prior[x] * marg[y]))
    return max(total, 0.0)


def mutual_information_joint(joint: np.ndarray) -> float:
    """I(X; Y) in nats from an arbitrary 2x2 joint distribution."""
    joint = np.asarray(joint, dtype=float)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    total = 0.0
    for x in range(2):
        for y in range(2):
            pxy = joint[x, y]
            if pxy > 0.0:
                total += pxy * math.log(pxy / (px[x] * py[y]))
    return max(total, 0.0)


def pair_joint_through_input(p1: float, ch_a: BinaryChannel, ch_b: BinaryChannel) -> np.ndarray:
    """Joint distribution of the two outputs (A, B) of channels sharing one input.

    joint[a, b] = sum_s P(s) ch_a(a|s) ch_b(b|s); the two observations are
    conditionally independent given the common Bernoulli(p1) input.
    """
    prior = np.array([1.0 - p1, p1])
    joint = np.zeros((2, 2))
    for s in range(2):
        joint += prior[s] * np.outer(ch_a.p[s], ch_b.p[s])
    return joint


def binary_kl(p: float, q: float) -> float:
    """Binary KL divergence in nats, with 0*ln 0 := 0 and inf on support mismatch."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("arguments must be probabilities")
    total = 0.0
    for (a, b) in ((p, q), (1.0 - p, 1.0 - q)):
        if a > 0.0:
            if b <= 0.0:
                return math.inf
            total += a * math.log(a / b)
    return max(total, 0.0)


def i_max(p1: float, channel: BinaryChannel) -> float:
    """Largest single-observation log-likelihood increment max ln(P(in|out)/P(in)).

    Returns math.inf when the posterior is undefined for some output symbol;
    bound calculators treat that as vacuous.
    """
    try:
        post = posterior(p1, channel)
    except ZeroProbabilityOutput:
        return math.inf
    prior = np.array([1.0 - p1, p1])
    best = -math.inf
    for f in range(2):
        for y in range(2):
            if post.p[f, y] > 0.0:
                best = max(best, math.log(post.p[f, y] / prior[y]))
    return best


def compose(first: BinaryChannel, second: BinaryChannel) -> BinaryChannel:
    """Chain two channels: P(out|in) = sum_mid first(mid|in) * second(out|mid)."""
    return BinaryChannel(first.p @ second.p)
