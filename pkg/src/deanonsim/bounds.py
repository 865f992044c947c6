"""Closed-form performance bounds and statistical verification of the
structural properties of the growth model.

The calculators return a BoundReport whose named components recombine to
the headline numbers, so tests can check self-consistency. Everything is
in nats, matching the attacker's thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from .attacker import community_edge_priors
from .generator import generate_ground_truth
from .model import (BinaryChannel, GenerationParams, GrowthModel, NoiseModel,
                    VictimDistribution, entropy_nats)


@dataclass(frozen=True)
class BoundReport:
    """Expected-queries and error-probability upper bounds plus their parts."""

    q_bar_bound: float
    pe_bound: float
    components: dict[str, float]
    vacuous: bool

    def __post_init__(self):
        if not self.vacuous and not self.q_bar_bound > 0:
            raise ValueError("a non-vacuous bound must be positive")


def entropy_of_victim(dist: VictimDistribution) -> float:
    """H(M) in nats."""
    return entropy_nats(dist.probabilities())


def theorem1_bound(params: GenerationParams, scan_channel: BinaryChannel,
                   dist: VictimDistribution, epsilon: float,
                   c_prime: float = 1.0) -> BoundReport:
    """Single scan channel, trusted responses:
    q_bar <= (H(M) + ln(1/eps) + i_max) / (c' * I(E;F)), pe <= eps / c'.
    """
    if not (0.0 < c_prime <= 1.0):
        raise ValueError("c_prime must be in (0, 1]")
    p1 = params.mu / params.m
    if not (0.0 < p1 < 1.0):
        raise ValueError("edge prior mu/m must be in (0, 1)")
    h_m = entropy_of_victim(dist)
    log_inv_eps = math.log(1.0 / epsilon)
    imax = ch.i_max(p1, scan_channel)
    info = ch.mutual_information(p1, scan_channel)
    pe = epsilon / c_prime
    # An unusable query side forces q_bar to infinity; pe >= 1 keeps the
    # (still valid) query count but marks the report vacuous as a guarantee.
    q_broken = not math.isfinite(imax) or info <= 0.0
    q_bar = math.inf if q_broken else (h_m + log_inv_eps + imax) / (c_prime * info)
    return BoundReport(
        q_bar_bound=q_bar, pe_bound=pe, vacuous=q_broken or pe >= 1.0,
        components={"H_M": h_m, "log_inv_eps": log_inv_eps, "i_max": imax,
                    "I_E_F": info, "c_prime": c_prime, "p1": p1})


def theorem2_bound(params: GenerationParams, scan_channel: BinaryChannel,
                   dist: VictimDistribution, epsilon: float) -> BoundReport:
    """Block-model variant: walk communities in query order (popularity
    descending) accumulating |C| * I per community until the information
    budget psi = H(M) + ln(1/eps) + i_max is covered; the bound counts the
    fully queried communities plus the partial tail i*.
    """
    if params.model is GrowthModel.ALPHA_PA:
        raise ValueError("the community bound applies to the block models")
    priors = community_edge_priors(params.tau0, params.mu, params.m)
    taus_desc = sorted(priors, reverse=True)
    sizes = params.communities()

    h_m = entropy_of_victim(dist)
    log_inv_eps = math.log(1.0 / epsilon)
    imax = max(ch.i_max(priors[tau], scan_channel) for tau in taus_desc)
    psi = h_m + log_inv_eps + imax
    components: dict[str, float] = {
        "H_M": h_m, "log_inv_eps": log_inv_eps, "i_max": imax, "psi": psi}

    if not math.isfinite(imax):
        return BoundReport(math.inf, epsilon, components, vacuous=True)

    acc_info = 0.0
    acc_groups = 0
    for rank, tau in enumerate(taus_desc):
        size = sizes[tau]
        info = ch.mutual_information(priors[tau], scan_channel)
        components[f"I_tau_{rank}"] = info
        components[f"size_tau_{rank}"] = float(size)
        if info > 0.0 and acc_info + size * info >= psi:
            i_star = math.ceil((psi - acc_info) / info - 1e-12)
            components["i_star"] = float(i_star)
            components["full_communities_groups"] = float(acc_groups)
            return BoundReport(q_bar_bound=float(acc_groups + i_star), pe_bound=epsilon,
                               components=components, vacuous=False)
        acc_info += size * info
        acc_groups += size

    # Even exhausting every group cannot cover psi.
    components["full_communities_groups"] = float(acc_groups)
    return BoundReport(q_bar_bound=float(params.n), pe_bound=epsilon,
                       components=components, vacuous=True)


def theorem3_bound(params: GenerationParams, noise: NoiseModel,
                   dist: VictimDistribution, epsilon: float,
                   c_prime: float = 1.0) -> BoundReport:
    """Compound noise: empirical (scan, query) label weights times the
    per-pair Theorem-1-style term with I(Y;F); pe grows with |Gamma|.
    """
    if not (0.0 < c_prime <= 1.0):
        raise ValueError("c_prime must be in (0, 1]")
    p1 = params.mu / params.m
    h_m = entropy_of_victim(dist)
    log_inv_eps = math.log(1.0 / epsilon)
    weights = noise.joint_label_weights()
    # i_max is defined over (E, F) as in the single-channel bound; the (Y, F)
    # analogue is reported alongside because the right functional for the
    # compound case is an open point.
    imax = max(ch.i_max(p1, noise.gamma_channels[g]) for g, _ in weights)
    imax_y = max(_max_information_density(
        ch.pair_joint_through_input(p1, noise.gamma_channels[g], noise.theta_channels[t]))
        for g, t in weights)
    numerator = h_m + log_inv_eps + imax
    num_gammas = len(noise.gamma_channels)
    pe = num_gammas * epsilon / c_prime

    components: dict[str, float] = {
        "H_M": h_m, "log_inv_eps": log_inv_eps, "i_max": imax, "i_max_y": imax_y,
        "c_prime": c_prime, "p1": p1, "num_gammas": float(num_gammas)}
    q_broken = not math.isfinite(imax)
    q_bar = 0.0
    for idx, ((g, t), w) in enumerate(sorted(weights.items())):
        joint = ch.pair_joint_through_input(p1, noise.gamma_channels[g], noise.theta_channels[t])
        info = ch.mutual_information_joint(joint)
        components[f"weight_{idx}"] = w
        components[f"I_YF_{idx}"] = info
        if info <= 0.0:
            q_broken = True
        else:
            q_bar += w * numerator / (c_prime * info)
    if q_broken:
        q_bar = math.inf
    return BoundReport(q_bar_bound=q_bar, pe_bound=pe, components=components,
                       vacuous=q_broken or pe >= 1.0)


def _max_information_density(joint: np.ndarray) -> float:
    """max over supported cells of ln(p(x,y) / (p(x) p(y)))."""
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    best = -math.inf
    for x in range(2):
        for y in range(2):
            if joint[x, y] > 0.0:
                best = max(best, math.log(joint[x, y] / (px[x] * py[y])))
    return best


def prop2_tail_bound(params: GenerationParams, psi: float) -> float:
    """Tail bound on the per-user membership count:
    P(C >= mu (1 + psi) / beta) <= exp(-n * D(mu(1+psi)/m || mu/m))
    (the unknown leading constant is reported as 1 alongside).
    """
    top = params.m / params.mu - 1.0
    if not (0.0 < psi <= top):
        raise ValueError(f"psi must be in (0, {top}]")
    p_shift = params.mu * (1.0 + psi) / params.m
    kl = ch.binary_kl(p_shift, params.mu / params.m)
    return math.exp(-params.n * kl)


def prop2_threshold(params: GenerationParams, psi: float) -> float:
    """The membership count whose tail the bound controls: mu (1 + psi) / beta."""
    return params.mu * (1.0 + psi) / params.beta


# ---------------------------------------------------------------------------
# Monte Carlo verification of the structural propositions


@dataclass(frozen=True)
class PropositionCell:
    name: str
    estimate: float
    lower: float | None
    upper: float | None
    verdict: str  # pass | fail | inconclusive
    detail: dict = field(default_factory=dict)

    def __str__(self):
        lo = "-inf" if self.lower is None else f"{self.lower:.6g}"
        hi = "+inf" if self.upper is None else f"{self.upper:.6g}"
        return f"{self.name}: {self.estimate:.6g} in [{lo}, {hi}] -> {self.verdict}"


@dataclass(frozen=True)
class PropositionReport:
    num_samples: int
    cells: tuple[PropositionCell, ...]

    def cell(self, name: str) -> PropositionCell:
        for c in self.cells:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def num_failed(self) -> int:
        return sum(1 for c in self.cells if c.verdict == "fail")

    @property
    def passed(self) -> bool:
        return self.num_failed == 0


_PATTERNS = ((1, 1), (1, 0), (0, 0), (1, 0, 0))
_BOOTSTRAP_RESAMPLES = 500


def _pattern_frequencies(dense: np.ndarray, pattern: tuple[int, ...]) -> float:
    """Fraction of (user, group-tuple) cells matching the bit pattern,
    over disjoint consecutive group tuples."""
    width = len(pattern)
    n = dense.shape[1]
    usable = (n // width) * width
    match = np.ones((dense.shape[0], usable // width), dtype=bool)
    for offset, bit in enumerate(pattern):
        col = dense[:, offset:usable:width]
        match &= col if bit else ~col
    return float(match.mean())


def verify_propositions(params: GenerationParams, num_samples: int,
                        rng: np.random.Generator, psi_grid: tuple[float, ...] = (1.0,),
                        ) -> PropositionReport:
    """Generate ``num_samples`` graphs and check the moment, sparsity-tail
    and factorization claims against their closed-form targets.

    Verdicts: "pass" when the statistic clears its envelope with bootstrap
    support, "inconclusive" when sampling noise is too large to decide
    (never silently passed), "fail" otherwise.
    """
    if isinstance(psi_grid, float):
        psi_grid = (psi_grid,)
    n, m, mu = params.n, params.m, params.mu
    is_pa = params.model is GrowthModel.ALPHA_PA

    mean_d = np.empty(num_samples)
    mean_d2 = np.empty(num_samples)
    mean_cross = np.empty(num_samples)
    tails = {psi: np.empty(num_samples) for psi in psi_grid}
    joint_freq = {pat: np.empty(num_samples) for pat in _PATTERNS}
    edge_density = np.empty(num_samples)

    for g in range(num_samples):
        result = generate_ground_truth(params, rng)
        graph = result.graph
        sizes = graph.group_sizes.astype(float)
        total = sizes.sum()
        mean_d[g] = total / n
        mean_d2[g] = float((sizes ** 2).mean())
        mean_cross[g] = (total ** 2 - float((sizes ** 2).sum())) / (n * (n - 1))
        memberships = np.array([len(r) for r in graph.user_groups], dtype=float)
        for psi in psi_grid:
            tails[psi][g] = float((memberships >= prop2_threshold(params, psi)).mean())
        dense = np.zeros((m, n), dtype=bool)
        for k, row in enumerate(graph.user_groups):
            dense[k, row] = True
        for pat in _PATTERNS:
            joint_freq[pat][g] = _pattern_frequencies(dense, pat)
        edge_density[g] = total / (m * n)

    cells: list[PropositionCell] = []
    p_edge = float(edge_density.mean())  # mu/m up to skip events

    if is_pa:
        est = float(mean_d.mean())
        band = 0.01 * mu
        cells.append(PropositionCell(
            "prop1_mean_group_size", est, mu - band, mu + band,
            "pass" if abs(est - mu) <= band else "fail",
            {"se": float(mean_d.std(ddof=1) / math.sqrt(num_samples))}))

        est = float(mean_cross.mean())
        cells.append(PropositionCell(
            "prop1_cross_moment", est, mu ** 2 - 0.15, mu ** 2 + 0.15,
            "pass" if abs(est - mu ** 2) <= 0.15 else "fail",
            {"se": float(mean_cross.std(ddof=1) / math.sqrt(num_samples))}))

        est = float(mean_d2.mean())
        cells.append(PropositionCell(
            "prop1_second_moment", est, None, None,
            "pass" if math.isfinite(est) else "fail",
            {"se": float(mean_d2.std(ddof=1) / math.sqrt(num_samples))}))

    for psi in psi_grid:
        bound = prop2_tail_bound(params, psi)
        est = float(tails[psi].mean())
        cells.append(PropositionCell(
            f"prop2_tail_psi_{psi:g}", est, None, bound,
            "pass" if est <= bound else "fail",
            {"threshold": prop2_threshold(params, psi), "leading_constant": 1.0}))

    boot_idx = [rng.integers(0, num_samples, num_samples) for _ in range(_BOOTSTRAP_RESAMPLES)]
    for pat in _PATTERNS:
        marg = math.prod(p_edge if bit else 1.0 - p_edge for bit in pat)
        est_joint = float(joint_freq[pat].mean())
        boot = np.array([float(joint_freq[pat][idx].mean()) for idx in boot_idx])
        name = "".join(str(b) for b in pat)
        if is_pa:
            lo, hi = 1.0 - len(pat) * mu / m, math.exp(mu / params.beta)
            ratios = boot / marg
            est = est_joint / marg
            frac_inside = float(((ratios >= lo) & (ratios <= hi)).mean())
            if frac_inside >= 0.99:
                verdict = "pass"
            elif frac_inside <= 0.5:
                verdict = "fail"
            else:
                verdict = "inconclusive"
            cells.append(PropositionCell(
                f"prop3_ratio_{name}", est, lo, hi, verdict,
                {"bootstrap_inside": frac_inside}))
        else:
            w = sum(pat)
            lo, hi = (1.0 - w / params.delta) ** w, (1.0 + w / params.delta) ** w
            with np.errstate(divide="ignore"):
                ratios = marg / boot
            est = marg / est_joint if est_joint > 0 else math.inf
            ci_lo, ci_hi = np.quantile(ratios, [0.005, 0.995])
            # The envelope can be razor thin (width 0 at weight 0), so the
            # verdict asks whether it is consistent with the bootstrap CI.
            if ci_hi < lo or ci_lo > hi:
                verdict = "fail"
            elif (ci_hi - ci_lo) > 0.5:
                verdict = "inconclusive"
            else:
                verdict = "pass"
            cells.append(PropositionCell(
                f"prop4_inverse_ratio_{name}", float(est), lo, hi, verdict,
                {"ci": (float(ci_lo), float(ci_hi))}))

    return PropositionReport(num_samples=num_samples, cells=tuple(cells))
