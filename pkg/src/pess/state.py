"""Embeddings, residual bookkeeping, delay model and the constraint battery.

All capacity accounting is integer-exact: a request debits whole cycles/s and
bits/s on acceptance and credits the same amounts on release, so rebuilding a
state from its operational records reproduces the residual vectors bit for
bit.

The latency model has three parts: a fixed external term per chain, convex
processing delays that grow as a node's residual CPU shrinks, and per-arc
propagation plus local-network queuing. Queuing is only paid where traffic
actually enters or leaves a server that runs one of the chain's VSNFs: the
departing node's half-budget on the first arc after a VSNF and the arriving
node's half-budget on the last arc before one. Pure forwarding bypasses the
local network and costs nothing beyond propagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .service import DOWN, UP, Chain, ServiceError, ServiceRequest, VsnfSpec
from .topology import NodeId, PhysicalNetwork


class CapacityError(ValueError):
    """A debit would push a residual below zero."""


def validate_request_nodes(net: PhysicalNetwork, req: ServiceRequest) -> None:
    """Reject requests that name nodes outside the network outright."""
    n = net.n_nodes
    for label, nodes in (("ep1", [req.ep1]), ("ep2", req.ep2_set), ("veto", req.veto)):
        for node in nodes:
            if not 0 <= node < n:
                raise ServiceError(f"{label}: node {node} not in network of {n} nodes")


@dataclass(frozen=True)
class CostParams:
    """Objective weights: alpha scales the CPU term against the bandwidth
    term, delta keeps the inverse-residual weights finite on saturated
    resources."""

    alpha: float = 1.0
    delta: float = 1e-6

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")


def cpu_demand(gamma_u: float, beta: int) -> int:
    """CPU demand in cycles/s of one VSNF processing a beta bits/s flow."""
    return round(gamma_u * beta)


# -- embeddings ------------------------------------------------------------


@dataclass(frozen=True)
class ChainEmbedding:
    """Where one chain lives: entity hosts plus the routed path segments.

    The entity sequence is (source endpoint, VSNFs in chain order, target
    endpoint); ``segments[i]`` is the node path from entity i's host to
    entity i+1's host, a single-node tuple when both share a host.
    """

    src: NodeId
    dst: NodeId
    vsnf_nodes: tuple[NodeId, ...]
    segments: tuple[tuple[NodeId, ...], ...]

    def entity_nodes(self) -> tuple[NodeId, ...]:
        return (self.src, *self.vsnf_nodes, self.dst)

    def arcs(self, net: PhysicalNetwork) -> list[int]:
        """Directed arc indices traversed, with multiplicity."""
        out = []
        for seg in self.segments:
            for a, b in zip(seg, seg[1:]):
                out.append(net.arc(a, b))
        return out

    def to_dict(self) -> dict:
        return {
            "src": self.src,
            "dst": self.dst,
            "vsnf_nodes": list(self.vsnf_nodes),
            "segments": [list(seg) for seg in self.segments],
        }


@dataclass(frozen=True)
class Embedding:
    """One chain embedding per request chain, in request order."""

    chains: tuple[ChainEmbedding, ...]

    def cpu_demands(self, req: ServiceRequest) -> dict[NodeId, int]:
        demands: dict[NodeId, int] = {}
        for cemb, chain in zip(self.chains, req.chains):
            for node, spec in zip(cemb.vsnf_nodes, chain.vsnfs):
                demands[node] = demands.get(node, 0) + cpu_demand(spec.gamma_u, chain.beta_req)
        return demands

    def bw_demands(self, req: ServiceRequest, net: PhysicalNetwork) -> dict[int, int]:
        demands: dict[int, int] = {}
        for cemb, chain in zip(self.chains, req.chains):
            for arc in cemb.arcs(net):
                demands[arc] = demands.get(arc, 0) + chain.beta_req
        return demands

    def hosting_nodes(self) -> frozenset[NodeId]:
        return frozenset(n for cemb in self.chains for n in cemb.vsnf_nodes)

    def to_dict(self) -> dict:
        return {"chains": [cemb.to_dict() for cemb in self.chains]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Embedding":
        return cls(
            tuple(
                ChainEmbedding(
                    src=entry["src"],
                    dst=entry["dst"],
                    vsnf_nodes=tuple(entry["vsnf_nodes"]),
                    segments=tuple(tuple(seg) for seg in entry["segments"]),
                )
                for entry in doc["chains"]
            )
        )


# -- delay model -------------------------------------------------------------


def processing_delay(
    gamma_u: float, sigma: float, residual_gamma_i: float, gamma_cu: int, delta: float
) -> float:
    """Per-packet processing delay of one VSNF on a node.

    ``residual_gamma_i`` is the node's residual CPU before this chain is
    charged and ``gamma_cu`` the chain's own demand there, so the denominator
    is what the node has left once the flow runs. Callers enforce the
    capacity constraint first, which keeps the denominator >= delta.
    """
    return gamma_u * sigma / ((residual_gamma_i - gamma_cu) + delta)


def chain_fixed_delay(cemb: ChainEmbedding, chain: Chain, net: PhysicalNetwork) -> float:
    """Load-independent latency: external term, propagation, queuing."""
    total = chain.pi_external
    n_entities = len(cemb.vsnf_nodes) + 2
    for idx, seg in enumerate(cemb.segments):
        if len(seg) < 2:
            continue
        for a, b in zip(seg, seg[1:]):
            total += net.arc_delay(net.arc(a, b))
        # Entity idx sits at seg[0], entity idx+1 at seg[-1]; endpoints are
        # entities 0 and n_entities-1 and do not pay local-network queuing.
        if 0 < idx:
            total += net.nodes[seg[0]].queuing_budget / 2.0
        if idx + 1 < n_entities - 1:
            total += net.nodes[seg[-1]].queuing_budget / 2.0
    return total


def chain_latency(
    state: "NetworkState",
    cemb: ChainEmbedding,
    chain: Chain,
    net: PhysicalNetwork,
    delta: float,
) -> float:
    """End-to-end latency of a chain against pre-acceptance residuals."""
    total = chain_fixed_delay(cemb, chain, net)
    for node, spec in zip(cemb.vsnf_nodes, chain.vsnfs):
        total += processing_delay(
            spec.gamma_u,
            chain.sigma,
            state.residual_gamma[node],
            cpu_demand(spec.gamma_u, chain.beta_req),
            delta,
        )
    return total


def gamma_threshold(
    chain: Chain, cemb: ChainEmbedding, net: PhysicalNetwork, delta: float
) -> float:
    """Residual CPU below which the chain's latency bound would break.

    This is the average residual each hosting node must keep for the chain's
    processing delays to fit inside the latency budget left after the fixed
    terms. Infinity flags a chain whose fixed terms alone exhaust the budget.
    """
    cycles_per_packet = sum(spec.gamma_u * chain.sigma for spec in chain.vsnfs)
    budget = chain.lambda_max - chain_fixed_delay(cemb, chain, net)
    if budget <= 0.0:
        return math.inf
    return cycles_per_packet / budget - delta


# -- cost --------------------------------------------------------------------


def embedding_cost(
    state: "NetworkState",
    emb: Embedding,
    req: ServiceRequest,
    net: PhysicalNetwork,
    params: CostParams,
) -> float:
    """Weighted resource footprint of an embedding.

    Every traversed arc contributes its bandwidth demand scaled by the
    inverse of the arc's residual, every placement its CPU demand scaled by
    the inverse of the node's residual; residuals are taken before the
    request itself is charged, so scarcer resources cost more.
    """
    delta = params.delta
    total = 0.0
    for cemb, chain in zip(emb.chains, req.chains):
        for seg in cemb.segments:
            for a, b in zip(seg, seg[1:]):
                arc = net.arc(a, b)
                total += chain.beta_req / (state.residual_beta[arc] + delta)
        for node, spec in zip(cemb.vsnf_nodes, chain.vsnfs):
            total += (
                params.alpha
                * cpu_demand(spec.gamma_u, chain.beta_req)
                / (state.residual_gamma[node] + delta)
            )
    return total


# -- network state -----------------------------------------------------------


@dataclass
class OperationalChain:
    """Bookkeeping for one accepted chain while its service is active."""

    chain_id: int
    service_id: int
    chain: Chain
    emb: ChainEmbedding
    threshold: float  # guard value: minimum viable average residual CPU
    fixed_delay: float
    cpu_by_node: dict[NodeId, int]
    processing_terms: tuple[tuple[NodeId, float], ...]  # (host, cycles/packet)
    arcs: tuple[int, ...]  # traversed arc indices, with multiplicity


@dataclass(frozen=True)
class RecheckVerdict:
    ok: bool
    violating_chain: int | None = None


class NetworkState:
    """Residual capacities plus the ledger of currently embedded chains."""

    def __init__(self, net: PhysicalNetwork) -> None:
        self.net = net
        self.residual_gamma: list[int] = [n.gamma_nominal for n in net.nodes]
        self.residual_beta: list[int] = []
        for link in net.links:
            self.residual_beta += [link.beta_nominal, link.beta_nominal]
        self.operational: dict[int, OperationalChain] = {}
        self.node_chains: list[set[int]] = [set() for _ in net.nodes]
        self.node_guard: list[int | None] = [None] * net.n_nodes
        self.services: dict[int, tuple[int, ...]] = {}
        self._next_chain_id = 0
        self._next_service_id = 0

    @classmethod
    def fresh(cls, net: PhysicalNetwork) -> "NetworkState":
        return cls(net)

    def clone(self) -> "NetworkState":
        twin = object.__new__(NetworkState)
        twin.net = self.net
        twin.residual_gamma = list(self.residual_gamma)
        twin.residual_beta = list(self.residual_beta)
        twin.operational = dict(self.operational)
        twin.node_chains = [set(s) for s in self.node_chains]
        twin.node_guard = list(self.node_guard)
        twin.services = dict(self.services)
        twin._next_chain_id = self._next_chain_id
        twin._next_service_id = self._next_service_id
        return twin

    # -- resource accounting ------------------------------------------------

    def _debit(self, emb: Embedding, req: ServiceRequest) -> None:
        cpu = emb.cpu_demands(req)
        bw = emb.bw_demands(req, self.net)
        for node, demand in cpu.items():
            if demand > self.residual_gamma[node]:
                raise CapacityError(
                    f"node {node}: demand {demand} exceeds residual "
                    f"{self.residual_gamma[node]} cycles/s"
                )
        for arc, demand in bw.items():
            if demand > self.residual_beta[arc]:
                raise CapacityError(
                    f"arc {arc} (link {arc // 2}): demand {demand} exceeds "
                    f"residual {self.residual_beta[arc]} bits/s"
                )
        for node, demand in cpu.items():
            self.residual_gamma[node] -= demand
        for arc, demand in bw.items():
            self.residual_beta[arc] -= demand

    def register(
        self,
        emb: Embedding,
        req: ServiceRequest,
        params: CostParams,
    ) -> int:
        """Debit resources and append the chains to the operational ledger."""
        self._debit(emb, req)
        service_id = self._next_service_id
        self._next_service_id += 1
        chain_ids = []
        for cemb, chain in zip(emb.chains, req.chains):
            chain_id = self._next_chain_id
            self._next_chain_id += 1
            chain_ids.append(chain_id)
            cpu_by_node: dict[NodeId, int] = {}
            terms = []
            for node, spec in zip(cemb.vsnf_nodes, chain.vsnfs):
                cpu_by_node[node] = cpu_by_node.get(node, 0) + cpu_demand(
                    spec.gamma_u, chain.beta_req
                )
                terms.append((node, spec.gamma_u * chain.sigma))
            record = OperationalChain(
                chain_id=chain_id,
                service_id=service_id,
                chain=chain,
                emb=cemb,
                threshold=gamma_threshold(chain, cemb, self.net, params.delta),
                fixed_delay=chain_fixed_delay(cemb, chain, self.net),
                cpu_by_node=cpu_by_node,
                processing_terms=tuple(terms),
                arcs=tuple(cemb.arcs(self.net)),
            )
            self.operational[chain_id] = record
            for node in cpu_by_node:
                self.node_chains[node].add(chain_id)
                guard = self.node_guard[node]
                if guard is None or record.threshold > self.operational[guard].threshold:
                    self.node_guard[node] = chain_id
        self.services[service_id] = tuple(chain_ids)
        return service_id

    def release(self, service_id: int) -> None:
        """Credit back every resource the service holds and drop its chains."""
        try:
            chain_ids = self.services.pop(service_id)
        except KeyError:
            raise KeyError(f"no active service {service_id}") from None
        touched: set[NodeId] = set()
        for chain_id in chain_ids:
            record = self.operational.pop(chain_id)
            for node, demand in record.cpu_by_node.items():
                self.residual_gamma[node] += demand
                self.node_chains[node].discard(chain_id)
                touched.add(node)
            for arc in record.arcs:
                self.residual_beta[arc] += record.chain.beta_req
        for node in touched:
            self.node_guard[node] = self._guard_of(node)

    def _guard_of(self, node: NodeId) -> int | None:
        best: int | None = None
        for chain_id in self.node_chains[node]:
            if best is None:
                best = chain_id
                continue
            record, incumbent = self.operational[chain_id], self.operational[best]
            if (record.threshold, -chain_id) > (incumbent.threshold, -best):
                best = chain_id
        return best

    # -- audit ----------------------------------------------------------------

    def rebuilt(self) -> "NetworkState":
        """Recompute residuals and guards from the ledger alone."""
        twin = NetworkState(self.net)
        twin.operational = dict(self.operational)
        twin.services = dict(self.services)
        twin._next_chain_id = self._next_chain_id
        twin._next_service_id = self._next_service_id
        for chain_id in sorted(self.operational):
            record = self.operational[chain_id]
            for node, demand in record.cpu_by_node.items():
                twin.residual_gamma[node] -= demand
                twin.node_chains[node].add(chain_id)
            for arc in record.arcs:
                twin.residual_beta[arc] -= record.chain.beta_req
        for node in range(twin.net.n_nodes):
            twin.node_guard[node] = twin._guard_of(node)
        return twin


def residual_after(
    state: NetworkState, emb: Embedding, req: ServiceRequest
) -> NetworkState:
    """Functional variant of the debit: returns a new state, leaves the
    operational ledger untouched."""
    twin = state.clone()
    twin._debit(emb, req)
    return twin


# -- acceptance checks -------------------------------------------------------


def recheck_operational(
    state: NetworkState,
    emb: Embedding,
    req: ServiceRequest,
    params: CostParams,
) -> RecheckVerdict:
    """Would accepting this candidate break any already-running chain?

    Only the guard chain of each node the candidate draws CPU from is
    retested: it is the chain with the tightest residual-CPU threshold there,
    so if it survives the updated processing delays the others do too.
    """
    extra = emb.cpu_demands(req)
    if not extra:
        return RecheckVerdict(True)
    guards = {
        guard for node in extra if (guard := state.node_guard[node]) is not None
    }
    for chain_id in sorted(guards):
        record = state.operational[chain_id]
        if _updated_latency(state, record, extra, params.delta) > record.chain.lambda_max:
            return RecheckVerdict(False, chain_id)
    return RecheckVerdict(True)


def full_recheck(
    state: NetworkState,
    emb: Embedding,
    req: ServiceRequest,
    params: CostParams,
) -> RecheckVerdict:
    """Diagnostic exhaustive variant of recheck_operational (every chain)."""
    extra = emb.cpu_demands(req)
    for chain_id in sorted(state.operational):
        record = state.operational[chain_id]
        if _updated_latency(state, record, extra, params.delta) > record.chain.lambda_max:
            return RecheckVerdict(False, chain_id)
    return RecheckVerdict(True)


def _updated_latency(
    state: NetworkState,
    record: OperationalChain,
    extra_cpu: Mapping[NodeId, int],
    delta: float,
) -> float:
    """Latency of an operational chain after hypothetically charging
    ``extra_cpu``; the chain's own usage is already inside the residuals."""
    total = record.fixed_delay
    for node, cycles_per_packet in record.processing_terms:
        residual = state.residual_gamma[node] - extra_cpu.get(node, 0)
        total += cycles_per_packet / (residual + delta)
    return total


def check_security(
    emb: Embedding, req: ServiceRequest, net: PhysicalNetwork
) -> list[str]:
    """Security-policy violations: stateful co-location, regions, veto, order."""
    violations = []
    for group_idx, group in enumerate(req.stateful_groups):
        hosts = {emb.chains[c].vsnf_nodes[p] for c, p in group}
        if len(hosts) != 1:
            violations.append(
                f"stateful: group {group_idx} split across nodes {sorted(hosts)}"
            )
    for chain_idx, (cemb, chain) in enumerate(zip(emb.chains, req.chains)):
        for pos, (node, spec) in enumerate(zip(cemb.vsnf_nodes, chain.vsnfs)):
            where = f"chain {chain_idx} vsnf {pos} ({spec.name})"
            if spec.region == "ep1":
                if node != req.ep1:
                    violations.append(f"region: {where} must sit on ep1, got {node}")
            elif spec.region is not None:
                members = net.regions.get(spec.region)
                if members is None:
                    violations.append(f"region: {where} names unknown region '{spec.region}'")
                elif node not in members:
                    violations.append(
                        f"region: {where} outside region '{spec.region}' on node {node}"
                    )
            if node in req.veto:
                violations.append(f"veto: {where} placed on vetoed node {node}")
        hosts = cemb.entity_nodes()
        for idx, seg in enumerate(cemb.segments):
            if seg[0] != hosts[idx] or seg[-1] != hosts[idx + 1]:
                violations.append(
                    f"order: chain {chain_idx} segment {idx} runs {seg[0]}->{seg[-1]}, "
                    f"expected {hosts[idx]}->{hosts[idx + 1]}"
                )
    return violations


def validate_embedding(
    state: NetworkState,
    emb: Embedding,
    req: ServiceRequest,
    params: CostParams,
) -> list[str]:
    """Full constraint battery against a pre-acceptance state.

    Structural route checks, endpoint pinning, capacity, per-chain latency,
    security policy and the operational-chain recheck, reported as a list of
    human/parseable violation strings (empty means feasible).
    """
    net = state.net
    violations: list[str] = []
    if len(emb.chains) != len(req.chains):
        return [f"structure: {len(emb.chains)} chain embeddings for {len(req.chains)} chains"]

    for chain_idx, (cemb, chain) in enumerate(zip(emb.chains, req.chains)):
        where = f"chain {chain_idx}"
        if len(cemb.vsnf_nodes) != len(chain.vsnfs):
            violations.append(f"structure: {where} places {len(cemb.vsnf_nodes)} "
                              f"of {len(chain.vsnfs)} vsnfs")
            continue
        if len(cemb.segments) != len(cemb.vsnf_nodes) + 1:
            violations.append(f"structure: {where} has {len(cemb.segments)} segments")
            continue
        user_side, remote_side = (
            (cemb.src, cemb.dst) if chain.direction == UP else (cemb.dst, cemb.src)
        )
        if user_side != req.ep1:
            violations.append(f"endpoint: {where} user side on {user_side}, expected {req.ep1}")
        if remote_side not in req.ep2_set:
            violations.append(
                f"endpoint: {where} remote side on {remote_side}, not in {sorted(req.ep2_set)}"
            )
        for seg_idx, seg in enumerate(cemb.segments):
            if len(seg) != len(set(seg)):
                violations.append(f"route: {where} segment {seg_idx} repeats a node")
            for a, b in zip(seg, seg[1:]):
                try:
                    net.arc(a, b)
                except Exception:
                    violations.append(f"route: {where} segment {seg_idx} uses "
                                      f"missing arc {a}->{b}")

    if violations:
        return violations

    for node, demand in sorted(emb.cpu_demands(req).items()):
        if demand > state.residual_gamma[node]:
            violations.append(
                f"node-capacity: node {node} needs {demand}, has {state.residual_gamma[node]}"
            )
    for arc, demand in sorted(emb.bw_demands(req, net).items()):
        if demand > state.residual_beta[arc]:
            violations.append(
                f"link-capacity: arc {arc} needs {demand}, has {state.residual_beta[arc]}"
            )
    for chain_idx, (cemb, chain) in enumerate(zip(emb.chains, req.chains)):
        latency = chain_latency(state, cemb, chain, net, params.delta)
        if latency > chain.lambda_max:
            violations.append(
                f"latency: chain {chain_idx} takes {latency:.6g}s, bound {chain.lambda_max}s"
            )
    violations.extend(check_security(emb, req, net))
    verdict = recheck_operational(state, emb, req, params)
    if not verdict.ok:
        violations.append(f"op-latency: would break operational chain {verdict.violating_chain}")
    return violations
