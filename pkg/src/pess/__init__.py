"""Progressive embedding of security service chains on capacitated networks."""

from .heuristic import EmbedOutcome, pess_embed, place_on_path, register_operational
from .oracle import OracleBudgetExceeded, OracleConfig, OracleOutcome, exact_embed, objective_value
from .service import (
    Chain,
    RequestGenConfig,
    ServiceRequest,
    VsnfSpec,
    baseline_request,
    builtin_catalog,
    generate_request,
)
from .simulator import (
    Metrics,
    WorkloadConfig,
    run_heuristic_vs_oracle,
    run_scalability,
    run_simulation,
    run_twin_comparison,
)
from .state import (
    CapacityError,
    ChainEmbedding,
    CostParams,
    Embedding,
    NetworkState,
    chain_latency,
    check_security,
    embedding_cost,
    gamma_threshold,
    processing_delay,
    recheck_operational,
    residual_after,
    validate_embedding,
    validate_request_nodes,
)
from .topology import (
    PhysicalLink,
    PhysicalNetwork,
    PhysicalNode,
    TopologyError,
    builtin_profile,
    default_node_profile,
    generate_barabasi_albert,
    load_topology,
    propagation_delay,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "Chain",
    "ChainEmbedding",
    "CostParams",
    "EmbedOutcome",
    "Embedding",
    "Metrics",
    "NetworkState",
    "OracleBudgetExceeded",
    "OracleConfig",
    "OracleOutcome",
    "PhysicalLink",
    "PhysicalNetwork",
    "PhysicalNode",
    "RequestGenConfig",
    "ServiceRequest",
    "TopologyError",
    "VsnfSpec",
    "WorkloadConfig",
    "baseline_request",
    "builtin_catalog",
    "builtin_profile",
    "chain_latency",
    "check_security",
    "default_node_profile",
    "embedding_cost",
    "exact_embed",
    "gamma_threshold",
    "generate_barabasi_albert",
    "generate_request",
    "load_topology",
    "objective_value",
    "pess_embed",
    "place_on_path",
    "processing_delay",
    "propagation_delay",
    "recheck_operational",
    "register_operational",
    "residual_after",
    "run_heuristic_vs_oracle",
    "run_scalability",
    "run_simulation",
    "run_twin_comparison",
    "validate_embedding",
    "validate_request_nodes",
]
