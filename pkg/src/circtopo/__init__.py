"""Degree-constrained circulant communication topologies: search and evaluation."""

from .cayley import (
    DistanceProfile,
    GeneratorSet,
    MetricsCache,
    TopologyError,
    avg_path_length,
    bfs_distances,
    canonicalize,
    diameter,
    expo_generators,
    fibonacci_generators,
    is_connected,
    moore_min_diameter,
    prime_generators,
)
from .numtheory import CandidatePool, build_candidate_pool, gcd, multiplicative_order
from .propagation import propagation_score, variance_per_channel
from .rl import TrainConfig, TrainResult, train
from .sim import (
    BroadcastChannel,
    FailureConfig,
    GossipConfig,
    Graph,
    LoadConfig,
    broadcast_baseline,
    comm_load_sim,
    dissemination_stats,
    largest_connected_component,
    remove_edges,
    robustness_eval,
)

__version__ = "0.1.0"
