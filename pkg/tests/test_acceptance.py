"""Acceptance gate: every release criterion as one test, each printing a
PASS/FAIL line (run with -s to see them inline).

The heavy Monte Carlo batches are shared through module fixtures. Criteria
are statistical where the target is statistical; tolerances are fixed here,
not tuned at runtime.
"""

import math
import os
from pathlib import Path

import numpy as np
import pytest

from deanonsim import channels as ch
from deanonsim.attacker import ItsConfig, Variant
from deanonsim.bounds import (theorem1_bound, theorem2_bound,
                              theorem3_bound, verify_propositions)
from deanonsim.generator import (brute_force_generation_distribution,
                                 empirical_edge_set_distribution,
                                 generate_ground_truth, selection_probability,
                                 total_variation, PopularityState, popularity_update)
from deanonsim.harness import ExperimentConfig, NoiseSpec, run_experiment, substream
from deanonsim.model import GenerationParams, GrowthModel, VictimDistribution
from deanonsim.snap import ingest_snap_communities, write_snap_communities


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def pa_params(n, m, mu, alpha=1.0):
    return GenerationParams(n=n, m=m, mu=mu, alpha=alpha, model=GrowthModel.ALPHA_PA)


def noiseless_scaling_config(alpha: float, seed: int) -> ExperimentConfig:
    """m=1000 users, beta=0.1, mu=100, noiseless channels, uniform victim."""
    return ExperimentConfig(
        experiment=f"scaling-alpha-{alpha:g}",
        generation=pa_params(n=10_000, m=1000, mu=100, alpha=alpha),
        noise=NoiseSpec.noiseless(),
        victim=VictimDistribution.uniform(1000),
        its=ItsConfig(epsilon=0.01),
        trials=100, replicates=5, seed=seed)


def theta_mixture_family(levels: int) -> dict[str, ch.BinaryChannel]:
    """2**levels query channels mixing BSC(0.01) toward BSC(0.3)."""
    size = 2 ** levels
    return {f"t{i:02d}": ch.mixture(i / (size - 1), ch.bsc(0.01), ch.bsc(0.3))
            for i in range(size)}


def gamma_mixture_family(size: int) -> dict[str, ch.BinaryChannel]:
    """size scan channels mixing BSC(0.3) toward BSC(0.01)."""
    return {f"g{i:02d}": ch.mixture(i / (size - 1), ch.bsc(0.01), ch.bsc(0.3))
            for i in range(size)}


def query_noise_config(levels: int, seed: int) -> ExperimentConfig:
    """beta=0.4 graphs, noiseless scan, theta-diverse query noise."""
    return ExperimentConfig(
        experiment=f"query-noise-k{levels}",
        generation=pa_params(n=2500, m=1000, mu=100, alpha=1.0),
        noise=NoiseSpec(gamma={"g0": ch.identity_channel()},
                        theta=theta_mixture_family(levels)),
        victim=VictimDistribution.uniform(1000),
        its=ItsConfig(epsilon=0.1, variant=Variant.COMPOUND),
        trials=100, replicates=5, seed=seed)


def scan_noise_config(family_size: int, seed: int, trials: int = 100) -> ExperimentConfig:
    """beta=0.4 graphs, gamma-diverse scan noise, noiseless queries."""
    return ExperimentConfig(
        experiment=f"scan-noise-G{family_size}",
        generation=pa_params(n=2500, m=1000, mu=100, alpha=1.0),
        noise=NoiseSpec(gamma=gamma_mixture_family(family_size),
                        theta={"t0": ch.identity_channel()}),
        victim=VictimDistribution.uniform(1000),
        its=ItsConfig(epsilon=0.1, variant=Variant.COMPOUND),
        trials=trials, replicates=5, seed=seed)


def mean_and_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def bound_ordering_holds(records, summary) -> bool:
    """Measured mean queries must not beat a non-vacuous bound by > 2 se."""
    if summary.get("bound_vacuous", True):
        return True
    mean_q, se = mean_and_se([r.q for r in records])
    return mean_q <= summary["q_bar_bound"] + 2 * se


# ---------------------------------------------------------------------------
# shared Monte Carlo batches


@pytest.fixture(scope="module")
def props_report_pa():
    params = pa_params(n=200, m=200, mu=3, alpha=1.0)
    return verify_propositions(params, 10_000, substream(20_251, 5))


@pytest.fixture(scope="module")
def scaling_summaries():
    out = {}
    for alpha in (0.25, 1.0):
        records, summary = run_experiment(noiseless_scaling_config(alpha, seed=101))
        out[alpha] = (records, summary)
    return out


def test_c01_generator_exactness():
    checks = []
    rng = substream(1, 1)
    for params in (pa_params(50, 80, 3), pa_params(2, 1, 1), pa_params(30, 10, 4, alpha=0.4),
                   GenerationParams(n=20, m=15, mu=2, alpha=0.0, model=GrowthModel.IEE)):
        for _ in range(50):
            result = generate_ground_truth(params, rng)
            checks.append(result.graph.total_edges + result.num_skips == params.delta)
    # block model with equal initials: selection stays exactly 1/n forever
    iee = GenerationParams(n=64, m=64, mu=2, alpha=0.0, model=GrowthModel.IEE)
    state = PopularityState.initial(iee)
    uniform_before = all(selection_probability(state, j) == 1.0 / 64 for j in range(64))
    for j in range(64):
        state.set_popularity(j, popularity_update(state.tau[j], 1.0, j + 1, 0.0))
    uniform_after = all(selection_probability(state, j) == 1.0 / 64 for j in range(64))
    ok = all(checks) and uniform_before and uniform_after
    report("C1 generator exactness", ok,
           f"edge+skip identity on {len(checks)} runs, block-model selection exactly 1/n")


def test_c02_oracle_equivalence():
    params = pa_params(2, 2, 1)
    exact = brute_force_generation_distribution(params)
    empirical = empirical_edge_set_distribution(params, 100_000, substream(2, 1))
    tv = total_variation(empirical, exact)
    report("C2 oracle equivalence", tv < 0.01, f"total variation {tv:.4f} < 0.01")


def test_c03_group_size_moments(props_report_pa):
    cells = {c.name: c for c in props_report_pa.cells}
    mean_ok = cells["prop1_mean_group_size"].verdict == "pass"
    cross_ok = cells["prop1_cross_moment"].verdict == "pass"

    half = verify_propositions(pa_params(200, 200, 3, alpha=0.5), 10_000, substream(3, 5))
    half_cells = {c.name: c for c in half.cells}
    mean_ok &= half_cells["prop1_mean_group_size"].verdict == "pass"
    cross_ok &= half_cells["prop1_cross_moment"].verdict == "pass"

    second_moments = [cells["prop1_second_moment"].estimate]
    for n in (100, 400):
        rep = verify_propositions(pa_params(n, n, 3, alpha=1.0), 3000, substream(n, 5))
        second_moments.append(rep.cell("prop1_second_moment").estimate)
    spread = max(second_moments) / min(second_moments) - 1.0
    report("C3 group-size moments", mean_ok and cross_ok and spread < 0.10,
           f"E[D] and E[DiDj] in band for alpha in {{0.5, 1}}; "
           f"E[D^2] spread over n in {{100,200,400}} = {spread:.3f} < 0.10")


def test_c04_sparsity_and_factorization(props_report_pa):
    cells = {c.name: c for c in props_report_pa.cells}
    tail = cells["prop2_tail_psi_1"]
    tail_ok = tail.verdict == "pass"
    prop3 = [c for name, c in cells.items() if name.startswith("prop3_ratio_")]
    boot_ok = all(c.detail["bootstrap_inside"] >= 0.99 for c in prop3)

    iee = GenerationParams(n=200, m=200, mu=3, alpha=0.0, model=GrowthModel.IEE)
    sb_report = verify_propositions(iee, 10_000, substream(4, 5))
    prop4 = [c for c in sb_report.cells if c.name.startswith("prop4_")]
    prop4_ok = all(c.verdict != "fail" for c in prop4)

    report("C4 sparsity tail and factorization envelopes",
           tail_ok and boot_ok and prop4_ok,
           f"tail {tail.estimate:.4f} <= bound {tail.upper:.4f}; "
           f"{len(prop3)} sandwich cells with >=99% bootstrap support; "
           f"{len(prop4)} block-model envelope cells without failures")


def test_c05_scaling_reproduction(scaling_summaries):
    adjusted = {a: s["adjusted_mean_q"] for a, (_, s) in scaling_summaries.items()}
    alpha_gap = abs(adjusted[0.25] - adjusted[1.0]) / np.mean(list(adjusted.values()))
    gap_ok = alpha_gap < 0.10

    bound_ok = all(bound_ordering_holds(records, summary)
                   for records, summary in scaling_summaries.values())

    target_ok = all(abs(v - 20.0) <= 4.0 for v in adjusted.values())
    report("C5 scaling reproduction", target_ok and gap_ok and bound_ok,
           f"adjusted mean queries {adjusted[0.25]:.2f} (alpha=0.25) / "
           f"{adjusted[1.0]:.2f} (alpha=1) vs target 20 +- 4; "
           f"alpha gap {alpha_gap:.3f} < 0.10; bound ordering holds: {bound_ok}")


def test_c06_error_probability_bound():
    config = query_noise_config(levels=2, seed=606)
    records, summary = run_experiment(config)
    error_rate = summary["error_rate"]
    mean_q, _ = mean_and_se([r.q for r in records])
    bound_ok = bound_ordering_holds(records, summary)
    report("C6 error-probability bound",
           len(records) >= 500 and error_rate <= 2 * 0.1 and bound_ok,
           f"error rate {error_rate:.3f} <= 0.2 over {len(records)} trials; "
           f"mean Q {mean_q:.1f} vs bound {summary.get('q_bar_bound', float('inf')):.1f}")


def test_c07_noise_diversity_insensitivity():
    # Levels share one seed so the comparison is paired: identical graphs
    # and victims, only the channel family changes.
    bound_ok = True
    mean_qs = {}
    for levels in (1, 2, 3):
        records, summary = run_experiment(query_noise_config(levels, seed=707))
        mean_qs[levels] = round(summary["mean_q"], 1)
        bound_ok &= bound_ordering_holds(records, summary)
    q_values = list(mean_qs.values())
    q_spread = (max(q_values) - min(q_values)) / np.mean(q_values)

    # The success gate is an absolute 5-point spread, so the per-level rate
    # needs ~1-point standard error: 2000 trials per family size.
    success = {}
    for size in (2, 8, 32):
        records, summary = run_experiment(scan_noise_config(size, seed=733, trials=400))
        success[size] = summary["success_rate"]
        bound_ok &= bound_ordering_holds(records, summary)
    s_values = list(success.values())
    s_spread = max(s_values) - min(s_values)

    report("C7 noise-diversity insensitivity",
           q_spread < 0.15 and s_spread < 0.05 and bound_ok,
           f"query-noise mean-Q spread {q_spread:.3f} < 0.15 over levels {mean_qs}; "
           f"scan-noise success spread {s_spread:.3f} < 0.05 over {success}; "
           f"bound ordering holds: {bound_ok}")


def test_c08_bound_calculator_regression():
    uniform_1000 = VictimDistribution.uniform(1000)
    t1 = theorem1_bound(pa_params(10_000, 1000, 100), ch.identity_channel(),
                        uniform_1000, 0.01, c_prime=1.0)
    headline_ok = abs(t1.q_bar_bound - 42.50) <= 0.01 and t1.pe_bound == 0.01

    sb = GenerationParams(n=100, m=100, mu=3, alpha=0.0, model=GrowthModel.SB,
                          tau0=np.ones(100))
    t2 = theorem2_bound(sb, ch.identity_channel(), VictimDistribution.uniform(100), 0.1)
    t1_ref = theorem1_bound(sb, ch.identity_channel(), VictimDistribution.uniform(100), 0.1)
    t2_ok = abs(t2.q_bar_bound - t1_ref.q_bar_bound) <= 1.0 and t2.pe_bound == t1_ref.pe_bound

    from deanonsim.model import NoiseModel
    params = pa_params(1000, 500, 10)
    scan = ch.bsc(0.05)
    t3 = theorem3_bound(params, NoiseModel.homogeneous(500, scan, ch.identity_channel()),
                        VictimDistribution.uniform(500), 0.1)
    t1_single = theorem1_bound(params, scan, VictimDistribution.uniform(500), 0.1)
    t3_ok = (t3.q_bar_bound == pytest.approx(t1_single.q_bar_bound, rel=1e-12)
             and t3.pe_bound == t1_single.pe_bound)

    report("C8 bound-calculator regression", headline_ok and t2_ok and t3_ok,
           f"q_bar {t1.q_bar_bound:.4f} ~ 42.50, pe {t1.pe_bound}; reduction identities hold")


def test_c09_information_functional_suite():
    def h(p):
        return -p * math.log(p) - (1 - p) * math.log(1 - p)

    checks = [
        (ch.mutual_information(0.1, ch.identity_channel()), h(0.1)),
        (ch.mutual_information(0.5, ch.bsc(0.1)), math.log(2) - h(0.1)),
        (ch.mutual_information(0.3, ch.constant_channel(0.6)), 0.0),
        (ch.binary_kl(0.5, 0.25), 0.5 * math.log(2) + 0.5 * math.log(2 / 3)),
        (ch.binary_kl(1.0, 0.1), math.log(10)),
        (ch.binary_kl(0.123, 0.123), 0.0),
        (ch.posterior(0.5, ch.bsc(0.1)).p[1, 1], 0.9),
        (ch.posterior(0.1, ch.bsc(0.2)).p[1, 1], 0.08 / 0.26),
        (ch.posterior(0.4, ch.omission(0.3)).p[1, 1], 1.0),
        (ch.i_max(0.1, ch.identity_channel()), math.log(10)),
        (ch.i_max(0.1, ch.bsc(0.2)), math.log((0.08 / 0.26) / 0.1)),
        (ch.i_max(0.25, ch.constant_channel(0.5)), 0.0),
        (ch.compose(ch.bsc(0.1), ch.bsc(0.1)).p[0, 1], 0.18),
        (ch.compose(ch.identity_channel(), ch.identity_channel()).p[0, 0], 1.0),
    ]
    worst = max(abs(got - want) for got, want in checks)
    report("C9 information-functional unit suite", worst <= 1e-9,
           f"{len(checks)} fixtures, worst absolute error {worst:.2e}")


SNAP_FIXTURE = "# synthetic communities\n10 11 12 13\n11 12\n10 13 14\n15\n"


def test_c10a_snap_fixture_parsing(tmp_path):
    src = tmp_path / "fixture.txt"
    src.write_text(SNAP_FIXTURE, encoding="utf-8")
    graph, manifest = ingest_snap_communities(src, min_group_size=2,
                                              min_user_memberships=2)
    shape_ok = (manifest.raw_groups, manifest.raw_users, manifest.raw_edges) == (4, 6, 10)
    # kept users 10..13 relabel to 0..3; group 4 ("15") and user 14 drop out
    expected_groups = [[0, 1, 2, 3], [1, 2], [0, 3]]
    graph_ok = [g.tolist() for g in graph.group_members] == expected_groups
    out = tmp_path / "round.txt"
    write_snap_communities(graph, out)
    bytes_ok = out.read_bytes() == b"0 1 2 3\n1 2\n0 3\n"
    report("C10a synthetic community-file parsing",
           shape_ok and graph_ok and bytes_ok,
           f"manifest {manifest.raw_groups}/{manifest.raw_users}/{manifest.raw_edges}, "
           f"bit-exact round trip: {bytes_ok}")


LIVEJOURNAL_RAW_GROUPS = 664_414
LIVEJOURNAL_RAW_USERS = 3_997_962


def test_c10b_livejournal_end_to_end():
    """Optional full-dataset run; set DEANONSIM_LIVEJOURNAL to the extracted
    com-lj.all.cmty.txt from the SNAP LiveJournal community collection."""
    path = os.environ.get("DEANONSIM_LIVEJOURNAL", "data/com-lj.all.cmty.txt")
    if not Path(path).exists():
        pytest.skip("LiveJournal dataset not present; set DEANONSIM_LIVEJOURNAL to run")
    graph, manifest = ingest_snap_communities(path, min_group_size=400,
                                              min_user_memberships=4)
    print(f"raw groups {manifest.raw_groups} (reference {LIVEJOURNAL_RAW_GROUPS}), "
          f"raw users {manifest.raw_users} (reference {LIVEJOURNAL_RAW_USERS})")
    print(f"filtered groups {manifest.final_groups} (reference 1517), "
          f"filtered users {manifest.final_users} (reference 49164)")
    from deanonsim.attacker import run_attack
    from deanonsim.model import NoiseModel, sample_victim
    noise = NoiseModel.homogeneous(graph.num_users, ch.omission(0.05), ch.omission(0.05))
    scanned = ch.scan_graph(graph, noise, substream(10, 2))
    dist = VictimDistribution.uniform(graph.num_users)
    cfg = ItsConfig(epsilon=0.1, variant=Variant.COMPOUND)
    wins = 0
    for trial in range(10):
        rng = substream(10, 4, 0, trial)
        victim = sample_victim(dist, rng)
        wins += run_attack(graph, scanned, victim, noise, cfg, dist, rng).correct
    print(f"end-to-end success {wins}/10 at erasure 0.05")
    report("C10b LiveJournal end-to-end", manifest.raw_groups == LIVEJOURNAL_RAW_GROUPS,
           f"raw counts match the published dataset; filtered counts reported above")
