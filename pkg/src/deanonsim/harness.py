"""Experiment orchestration: configs, seeded substreams, trial fan-out and
result emission.

Reproducibility contract: a config plus a 64-bit seed fully determines the
record stream. Every (replicate, trial, purpose) tuple gets its own Philox
stream derived by key-splitting, so enlarging the trial count never
perturbs the draws of earlier trials, and replicates can run on parallel
workers while the merged output stays in deterministic order.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import bounds as bounds_mod
from .attacker import ItsConfig, QueryOrder, Variant, run_attack
from .channels import bsc, identity_channel, mixture, omission, scan_graph
from .model import (BinaryChannel, GenerationParams, GrowthModel, NoiseModel,
                    VictimDistribution)
from .generator import generate_ground_truth
from .model import sample_victim
from .plotting import plot_summary_series

RNG_FAMILY = f"philox4x64 (numpy {np.__version__})"

CSV_HEADER = ("experiment", "seed", "replicate", "trial", "m", "n", "alpha",
              "variant", "Q", "correct", "exhausted", "elapsed_ms")

_PURPOSE_GENERATE = 1
_PURPOSE_SCAN = 2
_PURPOSE_ASSIGN = 3
_PURPOSE_TRIAL = 4


def substream(seed: int, purpose: int, replicate: int = 0, trial: int = 0) -> np.random.Generator:
    """Independent Philox stream for one (purpose, replicate, trial) cell."""
    if not (0 <= seed < 2 ** 64):
        raise ValueError("seed must fit in 64 bits")
    if not (0 <= replicate < 2 ** 28 and 0 <= trial < 2 ** 28):
        raise ValueError("replicate/trial indices out of range")
    lane = (purpose << 56) | (replicate << 28) | trial
    return np.random.Generator(np.random.Philox(key=(seed << 64) | lane))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class NoiseSpec:
    gamma: dict[str, BinaryChannel]
    theta: dict[str, BinaryChannel]
    assignment: str = "round_robin"  # round_robin | random | explicit
    gamma_of_user: tuple[str, ...] | None = None
    theta_of_user: tuple[str, ...] | None = None

    def build(self, m: int, rng: np.random.Generator) -> NoiseModel:
        if self.assignment == "round_robin":
            return NoiseModel.round_robin(m, self.gamma, self.theta)
        if self.assignment == "random":
            return NoiseModel.random_assignment(m, self.gamma, self.theta, rng)
        if self.assignment == "explicit":
            if self.gamma_of_user is None or self.theta_of_user is None:
                raise ValueError("explicit assignment needs per-user label vectors")
            return NoiseModel(self.gamma, self.theta, self.gamma_of_user, self.theta_of_user)
        raise ValueError(f"unknown assignment rule {self.assignment!r}")

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls(gamma={"g0": identity_channel()}, theta={"t0": identity_channel()})


@dataclass(frozen=True)
class SweepPoint:
    label: str
    x: float
    overrides: dict


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    generation: GenerationParams
    noise: NoiseSpec
    victim: VictimDistribution
    its: ItsConfig
    trials: int
    replicates: int
    seed: int
    output_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "svg")
    sweep: tuple[SweepPoint, ...] = ()
    reference_series: tuple[str, tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.trials < 1 or self.replicates < 1:
            raise ValueError("need at least one trial and one replicate")
        if self.victim.m != self.generation.m:
            raise ValueError("victim distribution sized for a different user count")


def _channel_from_spec(spec: dict) -> BinaryChannel:
    kind = spec["kind"]
    if kind == "bsc":
        return bsc(float(spec["p"]))
    if kind == "omission":
        return omission(float(spec["s"]))
    if kind == "identity":
        return identity_channel()
    if kind == "mixture":
        return mixture(float(spec["w"]), _channel_from_spec(spec["a"]),
                       _channel_from_spec(spec["b"]))
    if kind == "matrix":
        return BinaryChannel(np.asarray(spec["p"], dtype=float))
    raise ValueError(f"unknown channel kind {kind!r}")


def _channel_family(specs: list[dict], prefix: str) -> dict[str, BinaryChannel]:
    family = {}
    for i, spec in enumerate(specs):
        label = spec.get("label", f"{prefix}{i}")
        if label in family:
            raise ValueError(f"duplicate channel label {label!r}")
        family[label] = _channel_from_spec(spec)
    return family


def _tau0_from_spec(gen: dict, n: int) -> np.ndarray | None:
    tau0 = gen.get("tau0")
    if tau0 is None:
        return None
    if isinstance(tau0, dict):
        values = []
        for block in tau0["communities"]:
            values.extend([float(block["tau"])] * int(block["count"]))
        if len(values) != n:
            raise ValueError("community counts do not add up to n")
        return np.asarray(values)
    return np.asarray(tau0, dtype=float)


def config_from_dict(raw: dict) -> ExperimentConfig:
    gen = raw["generation"]
    n, m = int(gen["n"]), int(gen["m"])
    model = GrowthModel[gen.get("model", "ALPHA_PA").upper()]
    params = GenerationParams(
        n=n, m=m, mu=int(gen["mu"]),
        alpha=float(gen.get("alpha", 1.0 if model is GrowthModel.ALPHA_PA else 0.0)),
        model=model, tau0=_tau0_from_spec(gen, n))

    noise_raw = raw.get("noise", {})
    noise = NoiseSpec(
        gamma=_channel_family(noise_raw.get("gamma", [{"kind": "identity"}]), "g"),
        theta=_channel_family(noise_raw.get("theta", [{"kind": "identity"}]), "t"),
        assignment=noise_raw.get("assignment", "round_robin"),
        gamma_of_user=tuple(noise_raw["gamma_of_user"]) if "gamma_of_user" in noise_raw else None,
        theta_of_user=tuple(noise_raw["theta_of_user"]) if "theta_of_user" in noise_raw else None)

    victim_raw = raw.get("victim", {"kind": "uniform"})
    kind = victim_raw["kind"]
    if kind == "uniform":
        victim = VictimDistribution.uniform(m)
    elif kind == "zipf":
        victim = VictimDistribution.zipf(m, float(victim_raw.get("params", {}).get("exponent", 1.0)))
    elif kind == "custom":
        victim = VictimDistribution.custom(victim_raw["params"]["c"])
    else:
        raise ValueError(f"unknown victim kind {kind!r}")

    its_raw = raw["its"]
    its = ItsConfig(
        epsilon=float(its_raw["epsilon"]),
        variant=Variant[its_raw.get("variant", "NOISELESS_QUERY").upper()],
        query_order=(QueryOrder[its_raw["query_order"].upper()]
                     if "query_order" in its_raw else None),
        min_queries_floor=int(its_raw.get("min_queries_floor", 0)))

    run = raw["run"]
    out = raw.get("output", {})
    sweep = tuple(SweepPoint(label=p["label"], x=float(p.get("x", i)),
                             overrides=p.get("overrides", {}))
                  for i, p in enumerate(raw.get("sweep", [])))
    reference = None
    if "reference" in out:
        ref = out["reference"]
        reference = (str(ref["label"]), tuple(float(v) for v in ref["x"]),
                     tuple(float(v) for v in ref["y"]))
    return ExperimentConfig(
        experiment=raw.get("experiment", "experiment"),
        generation=params, noise=noise, victim=victim, its=its,
        trials=int(run["trials"]), replicates=int(run["replicates"]),
        seed=int(run["seed"]), output_dir=out.get("dir", "out"),
        formats=tuple(out.get("formats", ("csv", "svg"))), sweep=sweep,
        reference_series=reference)


def config_from_json(path: str | Path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def apply_overrides(config: ExperimentConfig, overrides: dict, label: str) -> ExperimentConfig:
    """New config with dotted-path generation/run overrides (used by sweeps)."""
    gen = config.generation
    gen_kwargs = dict(n=gen.n, m=gen.m, mu=gen.mu, alpha=gen.alpha, model=gen.model,
                      tau0=None if gen.model is GrowthModel.ALPHA_PA else gen.tau0)
    run_kwargs = {}
    for key, value in overrides.items():
        scope, _, name = key.partition(".")
        if scope == "generation" and name in gen_kwargs:
            if name == "model":
                value = GrowthModel[str(value).upper()]
            gen_kwargs[name] = value
        elif scope == "run" and name in ("trials", "replicates", "seed"):
            run_kwargs[name] = int(value)
        else:
            raise ValueError(f"unsupported override {key!r}")
    if gen_kwargs["m"] != gen.m and config.victim.kind.value != "uniform":
        raise ValueError("sweeping m is only supported with a uniform victim")
    new_gen = GenerationParams(**gen_kwargs)
    victim = (VictimDistribution.uniform(new_gen.m)
              if new_gen.m != gen.m else config.victim)
    return replace(config, experiment=f"{config.experiment}:{label}",
                   generation=new_gen, victim=victim, sweep=(), **run_kwargs)


# ---------------------------------------------------------------------------
# records and summaries


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    seed: int
    replicate: int
    trial: int
    m: int
    n: int
    alpha: float
    variant: str
    q: int
    correct: bool
    exhausted: bool
    elapsed_ms: int

    def as_row(self) -> tuple:
        return (self.experiment, self.seed, self.replicate, self.trial, self.m,
                self.n, f"{self.alpha:g}", self.variant, self.q,
                str(self.correct).lower(), str(self.exhausted).lower(), self.elapsed_ms)


def summarize(records: list[ResultRecord], config: ExperimentConfig,
              num_errors: int = 0) -> dict:
    """Aggregates recomputable exactly from the raw records."""
    qs = [r.q for r in records]
    mean_q = sum(qs) / len(qs)
    success = sum(1 for r in records if r.correct) / len(records)
    exhausted = sum(1 for r in records if r.exhausted) / len(records)
    adjustment = math.log(1.0 / config.its.epsilon) / math.log(config.generation.m)
    summary = {
        "experiment": config.experiment,
        "seed": config.seed,
        "trials": len(records),
        "mean_q": mean_q,
        "adjusted_mean_q": mean_q - adjustment,
        "success_rate": success,
        "error_rate": 1.0 - success,
        "exhausted_rate": exhausted,
        "num_errors": num_errors,
        "rng": RNG_FAMILY,
    }
    report = bound_for_config(config)
    if report is not None:
        summary["q_bar_bound"] = report.q_bar_bound
        summary["pe_bound"] = report.pe_bound
        summary["bound_vacuous"] = report.vacuous
    return summary


def bound_for_config(config: ExperimentConfig) -> bounds_mod.BoundReport | None:
    """The matching closed-form bound, when the config fits one calculator."""
    gammas = list(config.noise.gamma.values())
    thetas = list(config.noise.theta.values())
    try:
        if config.its.variant is Variant.NOISELESS_QUERY and len(gammas) == 1:
            return bounds_mod.theorem1_bound(config.generation, gammas[0],
                                             config.victim, config.its.epsilon)
        if config.its.variant is Variant.SB_COMMUNITY and len(gammas) == 1:
            return bounds_mod.theorem2_bound(config.generation, gammas[0],
                                             config.victim, config.its.epsilon)
        noise = config.noise.build(config.generation.m,
                                   substream(config.seed, _PURPOSE_ASSIGN))
        return bounds_mod.theorem3_bound(config.generation, noise,
                                         config.victim, config.its.epsilon)
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# execution


def _run_replicate(config: ExperimentConfig, replicate: int,
                   clock: Callable[[], float] | None) -> tuple[list[ResultRecord], int]:
    clock = clock or time.perf_counter
    params = config.generation
    noise = config.noise.build(params.m, substream(config.seed, _PURPOSE_ASSIGN))
    gen_rng = substream(config.seed, _PURPOSE_GENERATE, replicate)
    truth = generate_ground_truth(params, gen_rng).graph
    scan_rng = substream(config.seed, _PURPOSE_SCAN, replicate)
    scanned = scan_graph(truth, noise, scan_rng)
    communities = params.tau0 if config.its.variant is Variant.SB_COMMUNITY else None

    records: list[ResultRecord] = []
    num_errors = 0
    for trial in range(config.trials):
        rng = substream(config.seed, _PURPOSE_TRIAL, replicate, trial)
        start = clock()
        try:
            victim = sample_victim(config.victim, rng)
            outcome = run_attack(truth, scanned, victim, noise, config.its,
                                 config.victim, rng, mu=params.mu,
                                 communities=communities)
            q, correct, exhausted = outcome.num_queries, outcome.correct, outcome.exhausted
        except Exception:
            num_errors += 1
            q, correct, exhausted = 0, False, False
        elapsed_ms = int(round((clock() - start) * 1000.0))
        records.append(ResultRecord(
            experiment=config.experiment, seed=config.seed, replicate=replicate,
            trial=trial, m=params.m, n=params.n, alpha=params.alpha,
            variant=config.its.variant.name, q=q, correct=correct,
            exhausted=exhausted, elapsed_ms=elapsed_ms))
    return records, num_errors


def run_experiment(config: ExperimentConfig, jobs: int = 1,
                   clock: Callable[[], float] | None = None,
                   ) -> tuple[list[ResultRecord], dict]:
    """All replicates and trials of one configuration.

    Per-trial failures are counted and recorded (q=0, incorrect), never
    abort the batch. Records come back in (replicate, trial) order no
    matter how workers interleave.
    """
    records: list[ResultRecord] = []
    num_errors = 0
    if jobs <= 1:
        for replicate in range(config.replicates):
            recs, errs = _run_replicate(config, replicate, clock)
            records.extend(recs)
            num_errors += errs
    else:
        if clock is not None:
            raise ValueError("an injected clock is not picklable across workers")
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_replicate, config, r, None)
                       for r in range(config.replicates)]
            for future in futures:  # submission order == replicate order
                recs, errs = future.result()
                records.extend(recs)
                num_errors += errs
    return records, summarize(records, config, num_errors)


def run_sweep(config: ExperimentConfig, jobs: int = 1,
              clock: Callable[[], float] | None = None,
              ) -> tuple[list[ResultRecord], list[dict]]:
    """Run every sweep point (or just the base config when there is none)."""
    if not config.sweep:
        records, summary = run_experiment(config, jobs=jobs, clock=clock)
        return records, [summary]
    all_records: list[ResultRecord] = []
    summaries: list[dict] = []
    for point in config.sweep:
        sub = apply_overrides(config, point.overrides, point.label)
        records, summary = run_experiment(sub, jobs=jobs, clock=clock)
        summary["label"] = point.label
        summary["x"] = point.x
        all_records.extend(records)
        summaries.append(summary)
    return all_records, summaries


# ---------------------------------------------------------------------------
# emission


def write_csv(records: list[ResultRecord], path: str | Path) -> None:
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.as_row())


def emit_results(records: list[ResultRecord], summaries: list[dict],
                 out_dir: str | Path, formats: tuple[str, ...] = ("csv", "svg"),
                 config: ExperimentConfig | None = None) -> dict[str, Path]:
    """Write CSV records, JSON summary and (for sweeps) the summary plot.

    Output bytes depend only on the inputs, so identical runs diff clean.
    """
    if not records:
        raise ValueError("refusing to emit an empty result set")
    if not summaries:
        raise ValueError("refusing to emit an empty summary")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    if "csv" in formats:
        path = out_dir / "records.csv"
        write_csv(records, path)
        written["csv"] = path

    path = out_dir / "summary.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summaries, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written["summary"] = path

    if "svg" in formats and len(summaries) > 1 and all("x" in s for s in summaries):
        series_by_label: dict[str, tuple[list[float], list[float]]] = {}
        for s in summaries:
            label = str(s.get("label", "run"))
            xs, ys = series_by_label.setdefault(label, ([], []))
            xs.append(float(s["x"]))
            ys.append(float(s["mean_q"]))
        series = [(label, xs, ys) for label, (xs, ys) in series_by_label.items()]
        reference = None
        if config is not None and config.reference_series is not None:
            name, xs, ys = config.reference_series
            reference = (name, list(xs), list(ys))
        path = out_dir / "summary.svg"
        plot_summary_series(series, path, xlabel="x", ylabel="mean queries",
                            title=summaries[0].get("experiment", ""),
                            reference=reference)
        written["svg"] = path

    if config is not None:
        manifest = {
            "experiment": config.experiment,
            "seed": config.seed,
            "trials": config.trials,
            "replicates": config.replicates,
            "rng": RNG_FAMILY,
            "csv_header": list(CSV_HEADER),
        }
        path = out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written["manifest"] = path
    return written
