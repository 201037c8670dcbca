"""Exhaustive reference solver.

Enumerates every placement of a request's entities (respecting region pins,
veto sets and stateful co-location) combined with every simple-path routing
between consecutive entities, filters with the same constraint battery the
online heuristic uses, and returns the assignment minimising the configured
objective. Branch-and-bound pruning only ever discards provably dominated or
infeasible branches, so the returned optimum is exact whenever the
enumeration budget is not exhausted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .service import UP, Chain, ServiceRequest
from .state import (
    ChainEmbedding,
    CostParams,
    Embedding,
    NetworkState,
    chain_latency,
    cpu_demand,
    embedding_cost,
    processing_delay,
    recheck_operational,
    validate_request_nodes,
)
from .topology import NodeId, PhysicalNetwork

RESOURCE_COST = "resource-cost"
ACTIVE_NODES = "active-nodes"
MIN_LATENCY = "min-latency"
_OBJECTIVES = (RESOURCE_COST, ACTIVE_NODES, MIN_LATENCY)

# Slack applied to incremental pruning bounds so float rounding can never
# discard an assignment the exact, shared-code check would accept.
_PRUNE_SLACK = 1e-9


class OracleBudgetExceeded(RuntimeError):
    """The enumeration budget ran out before the search space was covered."""


@dataclass(frozen=True)
class OracleConfig:
    objective: str = RESOURCE_COST
    max_path_len: int | None = None  # max arcs per routed segment
    max_enumeration: int = 2_000_000

    def __post_init__(self) -> None:
        if self.objective not in _OBJECTIVES:
            raise ValueError(f"objective must be one of {_OBJECTIVES}")
        if self.max_path_len is not None and self.max_path_len < 0:
            raise ValueError("max_path_len must be >= 0")
        if self.max_enumeration < 1:
            raise ValueError("max_enumeration must be >= 1")


@dataclass(frozen=True)
class OracleOutcome:
    status: str  # "optimal" | "infeasible"
    embedding: Embedding | None = None
    score: float | None = None
    evaluated: int = 0
    scores: tuple[float, ...] = ()

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def objective_value(
    state: NetworkState,
    emb: Embedding,
    req: ServiceRequest,
    objective: str,
    params: CostParams,
) -> float:
    """Score an embedding under one of the supported objectives.

    Active-node counting is the linear indicator-sum objective: with a big-M
    larger than the node count each indicator is forced to exactly "hosts at
    least one VSNF", so the score is the size of the hosting set.
    """
    if objective == RESOURCE_COST:
        return embedding_cost(state, emb, req, state.net, params)
    if objective == ACTIVE_NODES:
        return float(len(emb.hosting_nodes()))
    if objective == MIN_LATENCY:
        return sum(
            chain_latency(state, cemb, chain, state.net, params.delta)
            for cemb, chain in zip(emb.chains, req.chains)
        )
    raise ValueError(f"unknown objective {objective!r}")


@dataclass(frozen=True)
class _PathInfo:
    nodes: tuple[NodeId, ...]
    arcs: tuple[int, ...]
    prop_delay: float
    inv_residual: float  # sum of 1/(residual+delta) over the arcs


@dataclass(frozen=True)
class _ChainOption:
    cemb: ChainEmbedding
    cpu_by_node: tuple[tuple[NodeId, int], ...]
    bw_by_arc: tuple[tuple[int, int], ...]
    cost: float  # resource-cost contribution
    latency: float


class _Search:
    def __init__(
        self,
        state: NetworkState,
        req: ServiceRequest,
        cfg: OracleConfig,
        params: CostParams,
        keep_scores: bool,
    ) -> None:
        self.state = state
        self.net = state.net
        self.req = req
        self.cfg = cfg
        self.params = params
        self.keep_scores = keep_scores
        self.max_arcs = (
            cfg.max_path_len if cfg.max_path_len is not None else self.net.n_nodes - 1
        )
        self.ticks = 0
        self.paths: dict[tuple[NodeId, NodeId], list[_PathInfo]] = {}
        self.best_score = math.inf
        self.best_key: tuple | None = None
        self.best_emb: Embedding | None = None
        self.evaluated = 0
        self.scores: list[float] = []

    def tick(self) -> None:
        self.ticks += 1
        if self.ticks > self.cfg.max_enumeration:
            raise OracleBudgetExceeded(
                f"enumeration budget {self.cfg.max_enumeration} exhausted"
            )

    # -- path enumeration --------------------------------------------------

    def paths_between(self, a: NodeId, b: NodeId) -> list[_PathInfo]:
        key = (a, b)
        cached = self.paths.get(key)
        if cached is not None:
            return cached
        if a == b:
            found = [_PathInfo((a,), (), 0.0, 0.0)]
        else:
            found = []
            trail: list[NodeId] = [a]
            on_trail = {a}
            arcs: list[int] = []

            def descend(here: NodeId) -> None:
                if here == b:
                    self.tick()
                    prop = sum(self.net.arc_delay(arc) for arc in arcs)
                    inv = sum(
                        1.0 / (self.state.residual_beta[arc] + self.params.delta)
                        for arc in arcs
                    )
                    found.append(_PathInfo(tuple(trail), tuple(arcs), prop, inv))
                    return
                if len(arcs) >= self.max_arcs:
                    return
                for neighbor, arc in self.net.adjacency[here]:
                    if neighbor in on_trail:
                        continue
                    trail.append(neighbor)
                    on_trail.add(neighbor)
                    arcs.append(arc)
                    descend(neighbor)
                    trail.pop()
                    on_trail.discard(neighbor)
                    arcs.pop()

            descend(a)
            found.sort(key=lambda p: (p.inv_residual, len(p.nodes), p.nodes))
        self.paths[key] = found
        return found

    # -- per-chain options ---------------------------------------------------

    def chain_options(
        self, chain_idx: int, forced: dict[tuple[int, int], NodeId]
    ) -> list[_ChainOption]:
        chain = self.req.chains[chain_idx]
        remotes = sorted(self.req.ep2_set)
        slots = []
        for pos, spec in enumerate(chain.vsnfs):
            if (chain_idx, pos) in forced:
                slots.append((forced[(chain_idx, pos)],))
            else:
                slots.append(tuple(self.allowed_hosts(spec)))
        options: list[_ChainOption] = []
        for remote in remotes:
            src, dst = (self.req.ep1, remote) if chain.direction == UP else (remote, self.req.ep1)
            for hosts in itertools.product(*slots):
                self.tick()
                self.expand_placement(chain, src, dst, hosts, options)
        options.sort(key=self.option_order)
        return options

    def allowed_hosts(self, spec) -> list[NodeId]:
        if spec.region == "ep1":
            pool = [self.req.ep1]
        elif spec.region is not None:
            pool = sorted(self.net.regions.get(spec.region, ()))
        else:
            pool = list(range(self.net.n_nodes))
        return [n for n in pool if n not in self.req.veto]

    def expand_placement(
        self,
        chain: Chain,
        src: NodeId,
        dst: NodeId,
        hosts: tuple[NodeId, ...],
        options: list[_ChainOption],
    ) -> None:
        entity_hosts = (src, *hosts, dst)
        cpu: dict[NodeId, int] = {}
        processing = 0.0
        cpu_cost = 0.0
        for node, spec in zip(hosts, chain.vsnfs):
            demand = cpu_demand(spec.gamma_u, chain.beta_req)
            cpu[node] = cpu.get(node, 0) + demand
            processing += processing_delay(
                spec.gamma_u,
                chain.sigma,
                self.state.residual_gamma[node],
                demand,
                self.params.delta,
            )
            cpu_cost += self.params.alpha * demand / (
                self.state.residual_gamma[node] + self.params.delta
            )
        for node, demand in cpu.items():
            if demand > self.state.residual_gamma[node]:
                return
        queuing = 0.0
        n_entities = len(entity_hosts)
        for idx in range(n_entities - 1):
            if entity_hosts[idx] == entity_hosts[idx + 1]:
                continue
            if 0 < idx:
                queuing += self.net.nodes[entity_hosts[idx]].queuing_budget / 2.0
            if idx + 1 < n_entities - 1:
                queuing += self.net.nodes[entity_hosts[idx + 1]].queuing_budget / 2.0
        prop_budget = chain.lambda_max - chain.pi_external - queuing - processing
        if prop_budget < -_PRUNE_SLACK:
            return

        segment_paths = []
        for a, b in zip(entity_hosts, entity_hosts[1:]):
            paths = self.paths_between(a, b)
            if not paths:
                return
            segment_paths.append(paths)

        chosen: list[_PathInfo] = []

        def descend(seg_idx: int, prop_sum: float) -> None:
            if seg_idx == len(segment_paths):
                self.tick()
                self.finish_option(chain, src, dst, hosts, cpu, cpu_cost, chosen, options)
                return
            for info in segment_paths[seg_idx]:
                if prop_sum + info.prop_delay > prop_budget + _PRUNE_SLACK:
                    continue
                chosen.append(info)
                descend(seg_idx + 1, prop_sum + info.prop_delay)
                chosen.pop()

        descend(0, 0.0)

    def finish_option(
        self,
        chain: Chain,
        src: NodeId,
        dst: NodeId,
        hosts: tuple[NodeId, ...],
        cpu: dict[NodeId, int],
        cpu_cost: float,
        chosen: list[_PathInfo],
        options: list[_ChainOption],
    ) -> None:
        cemb = ChainEmbedding(
            src=src,
            dst=dst,
            vsnf_nodes=hosts,
            segments=tuple(info.nodes for info in chosen),
        )
        # Final feasibility through the shared latency function, so the
        # oracle can never disagree with the acceptance battery.
        latency = chain_latency(self.state, cemb, chain, self.net, self.params.delta)
        if latency > chain.lambda_max:
            return
        bw: dict[int, int] = {}
        bw_cost = 0.0
        for info in chosen:
            bw_cost += info.inv_residual * chain.beta_req
            for arc in info.arcs:
                demand = bw.get(arc, 0) + chain.beta_req
                if demand > self.state.residual_beta[arc]:
                    return
                bw[arc] = demand
        options.append(
            _ChainOption(
                cemb=cemb,
                cpu_by_node=tuple(sorted(cpu.items())),
                bw_by_arc=tuple(sorted(bw.items())),
                cost=bw_cost + cpu_cost,
                latency=latency,
            )
        )

    def option_order(self, option: _ChainOption):
        if self.cfg.objective == MIN_LATENCY:
            contribution = option.latency
        elif self.cfg.objective == ACTIVE_NODES:
            contribution = float(len({n for n, _ in option.cpu_by_node}))
        else:
            contribution = option.cost
        return (contribution, _encode_chain(option.cemb))

    def contribution(self, option: _ChainOption) -> float:
        if self.cfg.objective == MIN_LATENCY:
            return option.latency
        if self.cfg.objective == ACTIVE_NODES:
            return 0.0  # union size is not additive; no per-chain bound
        return option.cost

    # -- joint search over chains -------------------------------------------

    def run(self) -> OracleOutcome:
        groups = self.req.stateful_groups
        group_pools = []
        for group in groups:
            allowed: set[NodeId] | None = None
            for member in group:
                hosts = set(self.allowed_hosts(self.req.vsnf_at(member)))
                allowed = hosts if allowed is None else allowed & hosts
            group_pools.append(sorted(allowed or ()))
        if any(not pool for pool in group_pools):
            return OracleOutcome("infeasible", evaluated=self.evaluated)

        for assignment in itertools.product(*group_pools):
            forced = {
                member: node
                for group, node in zip(groups, assignment)
                for member in group
            }
            per_chain = []
            feasible = True
            for chain_idx in range(len(self.req.chains)):
                options = self.chain_options(chain_idx, forced)
                if not options:
                    feasible = False
                    break
                per_chain.append(options)
            if feasible:
                self.join_chains(per_chain)

        if self.best_emb is None:
            return OracleOutcome(
                "infeasible", evaluated=self.evaluated, scores=tuple(self.scores)
            )
        return OracleOutcome(
            "optimal",
            embedding=self.best_emb,
            score=self.best_score,
            evaluated=self.evaluated,
            scores=tuple(self.scores),
        )

    def join_chains(self, per_chain: list[list[_ChainOption]]) -> None:
        n_chains = len(per_chain)
        suffix_lb = [0.0] * (n_chains + 1)
        for idx in range(n_chains - 1, -1, -1):
            suffix_lb[idx] = suffix_lb[idx + 1] + min(
                self.contribution(opt) for opt in per_chain[idx]
            )
        cpu_used: dict[NodeId, int] = {}
        bw_used: dict[int, int] = {}
        chosen: list[_ChainOption] = []

        def descend(idx: int, acc: float) -> None:
            if idx == n_chains:
                self.leaf(chosen)
                return
            for option in per_chain[idx]:
                contribution = self.contribution(option)
                if not self.keep_scores and (
                    acc + contribution + suffix_lb[idx + 1] > self.best_score + _PRUNE_SLACK
                ):
                    if self.cfg.objective != ACTIVE_NODES:
                        # Options are sorted by contribution, so everything
                        # after this one is dominated too.
                        break
                    continue
                fits = True
                for node, demand in option.cpu_by_node:
                    if cpu_used.get(node, 0) + demand > self.state.residual_gamma[node]:
                        fits = False
                        break
                if fits:
                    for arc, demand in option.bw_by_arc:
                        if bw_used.get(arc, 0) + demand > self.state.residual_beta[arc]:
                            fits = False
                            break
                if not fits:
                    continue
                for node, demand in option.cpu_by_node:
                    cpu_used[node] = cpu_used.get(node, 0) + demand
                for arc, demand in option.bw_by_arc:
                    bw_used[arc] = bw_used.get(arc, 0) + demand
                chosen.append(option)
                descend(idx + 1, acc + contribution)
                chosen.pop()
                for node, demand in option.cpu_by_node:
                    cpu_used[node] -= demand
                for arc, demand in option.bw_by_arc:
                    bw_used[arc] -= demand

        descend(0, 0.0)

    def leaf(self, chosen: list[_ChainOption]) -> None:
        self.tick()
        emb = Embedding(tuple(option.cemb for option in chosen))
        if not recheck_operational(self.state, emb, self.req, self.params).ok:
            return
        self.evaluated += 1
        if self.cfg.objective == ACTIVE_NODES:
            score = float(len(emb.hosting_nodes()))
        elif self.cfg.objective == MIN_LATENCY:
            score = sum(option.latency for option in chosen)
        else:
            score = sum(option.cost for option in chosen)
        if self.keep_scores:
            self.scores.append(score)
        key = _encode(emb)
        if score < self.best_score or (score == self.best_score and key < self.best_key):
            self.best_score = score
            self.best_key = key
            self.best_emb = emb


def _encode_chain(cemb: ChainEmbedding) -> tuple:
    return (cemb.src, cemb.dst, cemb.vsnf_nodes, cemb.segments)


def _encode(emb: Embedding) -> tuple:
    return tuple(_encode_chain(cemb) for cemb in emb.chains)


def exact_embed(
    state: NetworkState,
    req: ServiceRequest,
    cfg: OracleConfig = OracleConfig(),
    params: CostParams = CostParams(),
    *,
    keep_scores: bool = False,
) -> OracleOutcome:
    """Optimal embedding of ``req`` on ``state``, or infeasible.

    The state is never mutated. ``keep_scores`` disables objective-bound
    pruning and records every feasible assignment's score, which lets tests
    certify optimality by exhaustion on small instances.
    """
    validate_request_nodes(state.net, req)
    search = _Search(state, req, cfg, params, keep_scores)
    return search.run()
