import random

import pytest

from helpers import build_net, chain, path_net, request, vsnf
from pess.heuristic import pess_embed
from pess.oracle import (
    ACTIVE_NODES,
    MIN_LATENCY,
    RESOURCE_COST,
    OracleBudgetExceeded,
    OracleConfig,
    exact_embed,
    objective_value,
)
from pess.service import (
    DOWN,
    RequestGenConfig,
    ServiceError,
    builtin_catalog,
    generate_request,
)
from pess.state import (
    CostParams,
    NetworkState,
    chain_latency,
    validate_embedding,
)
from pess.topology import generate_barabasi_albert

PARAMS = CostParams()


class TestHandComputed:
    def test_three_node_path(self):
        # CPU 1e9 / 4e9 / 1e9, ample links: the middle node is the cheapest
        # host and the score is the literal two-arc + one-placement sum.
        net = path_net([10**9, 4 * 10**9, 10**9], bandwidth=10**10, delay=1e-5)
        state = NetworkState.fresh(net)
        req = request(0, [2], chain(vsnf(gamma=9.5), beta=10**6, lam=0.4))
        out = exact_embed(state, req)
        assert out.status == "optimal"
        cemb = out.embedding.chains[0]
        assert cemb.vsnf_nodes == (1,)
        assert cemb.segments == ((0, 1), (1, 2))
        delta = PARAMS.delta
        expected = (
            10**6 / (10**10 + delta) * 2
            + 9_500_000 / (4 * 10**9 + delta)
        )
        assert out.score == pytest.approx(expected, rel=1e-12)

    def test_certificate_by_exhaustion(self):
        net = build_net(
            [10**9, 4 * 10**9, 2 * 10**9, 10**9],
            [(0, 1), (1, 3), (0, 2), (2, 3)],
            delay=1e-5,
        )
        state = NetworkState.fresh(net)
        req = request(0, [3], chain(vsnf(gamma=9.5), beta=10**6, lam=0.4))
        full = exact_embed(state, req, keep_scores=True)
        assert full.status == "optimal"
        assert full.scores
        assert min(full.scores) == pytest.approx(full.score, rel=1e-12)
        pruned = exact_embed(state, req)
        assert pruned.score == pytest.approx(full.score, rel=1e-12)
        assert pruned.evaluated <= full.evaluated

    def test_tie_resolved_canonically(self):
        # Symmetric diamond: routes through 1 and 2 cost the same, the
        # lexicographically smaller embedding (through node 1) must win.
        net = build_net(
            [10**9] * 4,
            [(0, 1), (1, 3), (0, 2), (2, 3)],
            delay=1e-5,
        )
        state = NetworkState.fresh(net)
        req = request(0, [3], chain(beta=10**6, lam=0.4))
        out = exact_embed(state, req)
        assert out.embedding.chains[0].segments == ((0, 1, 3),)


class TestObjectives:
    def _setup(self):
        net = path_net([4 * 10**9, 4 * 10**9, 4 * 10**9], delay=1e-5)
        state = NetworkState.fresh(net)
        req = request(
            0,
            [2],
            chain(vsnf("a", 2.0), vsnf("b", 3.0), beta=10**6, lam=0.4),
        )
        return state, req

    def test_active_nodes_single_host(self):
        state, req = self._setup()
        out = exact_embed(state, req, OracleConfig(objective=ACTIVE_NODES))
        assert out.status == "optimal"
        assert out.score == 1.0
        assert len(out.embedding.hosting_nodes()) == 1

    def test_active_nodes_zero_when_no_vsnfs(self):
        net = path_net([10**9, 10**9], delay=1e-5)
        state = NetworkState.fresh(net)
        req = request(0, [1], chain(beta=1000, lam=0.4))
        out = exact_embed(state, req, OracleConfig(objective=ACTIVE_NODES))
        assert out.score == 0.0

    def test_min_latency_score_is_latency_sum(self):
        state, req = self._setup()
        out = exact_embed(state, req, OracleConfig(objective=MIN_LATENCY))
        assert out.status == "optimal"
        total = sum(
            chain_latency(state, cemb, c, state.net, PARAMS.delta)
            for cemb, c in zip(out.embedding.chains, req.chains)
        )
        assert out.score == total

    def test_min_latency_beats_resource_cost_on_latency(self):
        net = build_net(
            [4 * 10**9, 10**9, 50 * 10**9],
            [(0, 1, {"distance_km": 10}), (0, 2, {"distance_km": 500}),
             (2, 1, {"distance_km": 500})],
        )
        state = NetworkState.fresh(net)
        req = request(0, [1], chain(vsnf(gamma=2.0), beta=10**6, lam=0.4))
        fast = exact_embed(state, req, OracleConfig(objective=MIN_LATENCY))
        cheap = exact_embed(state, req, OracleConfig(objective=RESOURCE_COST))
        lat = lambda out: sum(
            chain_latency(state, cemb, c, state.net, PARAMS.delta)
            for cemb, c in zip(out.embedding.chains, req.chains)
        )
        assert lat(fast) <= lat(cheap)

    def test_objective_value_dispatch(self):
        state, req = self._setup()
        out = exact_embed(state, req)
        assert objective_value(state, out.embedding, req, RESOURCE_COST, PARAMS) == (
            pytest.approx(out.score)
        )
        assert objective_value(state, out.embedding, req, ACTIVE_NODES, PARAMS) >= 1.0
        with pytest.raises(ValueError, match="unknown objective"):
            objective_value(state, out.embedding, req, "fastest", PARAMS)


class TestStatus:
    def test_infeasible_tiny_latency(self):
        net = path_net([10**9] * 3, delay=0.3)
        state = NetworkState.fresh(net)
        req = request(0, [2], chain(beta=1000, lam=0.2))
        out = exact_embed(state, req)
        assert out.status == "infeasible"
        assert out.embedding is None
        assert not out.optimal

    def test_infeasible_stateful_dead_pool(self):
        net = build_net([10**9] * 3, [(0, 1), (1, 2)], regions={"dmz": [1]})
        state = NetworkState.fresh(net)
        ids = vsnf("snort", 9.5, stateful=True, region="dmz")
        req = request(
            0,
            [2],
            chain(ids, beta=1000, lam=0.4),
            chain(ids, direction=DOWN, beta=1000, lam=0.4),
            groups=[[(0, 0), (1, 0)]],
            veto=[1],
        )
        out = exact_embed(state, req)
        assert out.status == "infeasible"

    def test_budget_exceeded(self):
        net = generate_barabasi_albert(10, 2, seed=1)
        state = NetworkState.fresh(net)
        req = request(0, [9], chain(vsnf(), beta=1000, lam=0.4))
        with pytest.raises(OracleBudgetExceeded, match="budget 10"):
            exact_embed(state, req, OracleConfig(max_enumeration=10))

    def test_out_of_range_request(self):
        net = path_net([10**9] * 2)
        state = NetworkState.fresh(net)
        with pytest.raises(ServiceError, match="ep2"):
            exact_embed(state, request(0, [7], chain()))

    def test_state_never_mutated(self):
        net = path_net([10**9] * 3, delay=1e-5)
        state = NetworkState.fresh(net)
        before_gamma = list(state.residual_gamma)
        before_beta = list(state.residual_beta)
        exact_embed(state, request(0, [2], chain(vsnf(), beta=1000, lam=0.4)))
        assert state.residual_gamma == before_gamma
        assert state.residual_beta == before_beta
        assert not state.operational


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            OracleConfig(objective="fastest")
        with pytest.raises(ValueError):
            OracleConfig(max_path_len=-1)
        with pytest.raises(ValueError):
            OracleConfig(max_enumeration=0)

    def test_max_path_len_zero_blocks_routes(self):
        net = path_net([10**9] * 2, delay=1e-5)
        state = NetworkState.fresh(net)
        req = request(0, [1], chain(beta=1000, lam=0.4))
        out = exact_embed(state, req, OracleConfig(max_path_len=0))
        assert out.status == "infeasible"
        degenerate = request(0, [0, 1], chain(beta=1000, lam=0.4))
        out = exact_embed(state, degenerate, OracleConfig(max_path_len=0))
        assert out.status == "optimal"
        assert out.embedding.chains[0].segments == ((0,),)

    def test_max_path_len_limits_detours(self):
        net = build_net(
            [10**9] * 4,
            [(0, 1, {"bandwidth": 500}), (0, 2), (2, 3), (3, 1)],
        )
        state = NetworkState.fresh(net)
        req = request(0, [1], chain(beta=1000, lam=0.4))
        short = exact_embed(state, req, OracleConfig(max_path_len=1))
        assert short.status == "infeasible"
        long = exact_embed(state, req, OracleConfig(max_path_len=3))
        assert long.status == "optimal"


class TestDominance:
    def test_heuristic_never_beats_oracle(self):
        rng = random.Random(17)
        catalog = builtin_catalog()
        cfg = RequestGenConfig(
            chain_count=(1, 2), vsnfs_per_chain=(0, 2), ep2_size=1
        )
        solved = 0
        for trial in range(40):
            net = generate_barabasi_albert(7, 2, seed=trial)
            state = NetworkState.fresh(net)
            req = generate_request(net, catalog, cfg, rng)
            heur = pess_embed(state, req, PARAMS, register=False)
            exact = exact_embed(state, req)
            if heur.accepted:
                assert exact.status == "optimal"
                assert heur.cost >= exact.score - 1e-9 * max(1.0, exact.score)
                assert validate_embedding(state, exact.embedding, req, PARAMS) == []
                solved += 1
        assert solved >= 25
