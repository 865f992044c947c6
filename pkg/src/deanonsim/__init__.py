"""Simulator and analysis toolkit for membership-fingerprint
deanonymization attacks on bipartite user-group graphs.

Generate ground-truth graphs under preferential-attachment or block
models, distort them through per-user binary noise channels, run the
information-threshold attack against sampled victims, and compare the
measured query counts and error rates with closed-form bounds.
"""

from .model import (AttackOutcome, BinaryChannel, BipartiteGraph,
                    GenerationParams, GrowthModel, NoiseModel, VictimDistribution,
                    VictimKind, fingerprint, sample_victim)
from .generator import (GenerationResult, PopularityState, PrefixSumTree,
                        brute_force_generation_distribution, generate_ground_truth,
                        popularity_update, selection_probability)
from .channels import (binary_kl, bsc, compose, i_max, identity_channel,
                       mixture, mutual_information, omission, posterior,
                       query_response, scan_graph)
from .attacker import (AttackDiagnostic, InformationState, ItsConfig,
                       QueryOrder, Variant, identify, next_query, run_attack)
from .bounds import (BoundReport, PropositionReport, entropy_of_victim,
                     prop2_tail_bound, theorem1_bound, theorem2_bound,
                     theorem3_bound, verify_propositions)
from .harness import (ExperimentConfig, NoiseSpec, ResultRecord, config_from_dict,
                      config_from_json, emit_results, run_experiment, run_sweep,
                      substream)
from .snap import IngestManifest, ingest_snap_communities, write_snap_communities

__version__ = "0.1.0"

__all__ = [
    "AttackDiagnostic", "AttackOutcome", "BinaryChannel", "BipartiteGraph",
    "BoundReport", "ExperimentConfig", "GenerationParams", "GenerationResult",
    "GrowthModel", "InformationState", "IngestManifest", "ItsConfig",
    "NoiseModel", "NoiseSpec", "PopularityState", "PrefixSumTree",
    "PropositionReport", "QueryOrder", "ResultRecord", "Variant",
    "VictimDistribution", "VictimKind", "binary_kl",
    "brute_force_generation_distribution", "bsc", "compose", "config_from_dict",
    "config_from_json", "emit_results", "entropy_of_victim", "fingerprint",
    "generate_ground_truth", "i_max", "identify", "identity_channel",
    "ingest_snap_communities", "mixture", "mutual_information", "next_query",
    "omission", "popularity_update", "posterior", "prop2_tail_bound",
    "query_response", "run_attack", "run_experiment", "run_sweep",
    "sample_victim", "scan_graph", "selection_probability", "substream",
    "theorem1_bound", "theorem2_bound", "theorem3_bound",
    "verify_propositions", "write_snap_communities",
]
