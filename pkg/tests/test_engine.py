import logging
import unittest
from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from engine.alm import AffineConstraint, SmoothFunction, alm_solve
from engine.base import EngineResult
from engine.centralized import CentralizedEngine, cc_inner_sweep, cc_outer_update
from engine.config import EngineConfig
from engine.decentralized import DecentralizedEngine
from engine.factory import EngineFactory
from engine.residuals import compute_residuals, surrogate_value
from engine.state import EngineState
from engine.stopping import Decision, RunStatus, inner_satisfied, stopping_check
from models.core import ResidualReport, as_block
from models.errors import CapabilityError, ParameterError, TopologyError
from models.objectives import LocalObjective
from solvers.local import SolverSpec
from topology.coordination import CoordinationMode, CoordinationSequence, RandomPartialScheduler, single_level
from topology.graph import centralized_graph, chain_graph, star_graph
from topology.hierarchy import levels_from_matrix, star_matrix


def _clients(n=3, rows=10, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    truth = np.array([1.0, -2.0, 0.5][:dim])
    objectives = {}
    for c in range(n):
        features = 0.5 * rng.normal(size=(rows, dim))
        targets = features @ truth + 0.1 * rng.normal(size=rows)
        objectives[c] = LocalObjective("least-squares", features, targets, n * rows)
    return objectives


def _global_least_squares(objectives):
    features = np.vstack([o.features for o in objectives.values()])
    targets = np.concatenate([o.targets for o in objectives.values()])
    return np.linalg.lstsq(features, targets, rcond=None)[0]


def _report(primal, dual):
    return ResidualReport(primal_inf_norm=primal, dual_inf_norm=dual)


class TestEngineConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = EngineConfig()
        self.assertEqual((cfg.eps_pri, cfg.eps_dual, cfg.criterion), (1e-5, 1e-5, "B1"))

    def test_decay_must_be_in_unit_interval(self):
        with self.assertRaises(ValidationError):
            EngineConfig(eps_dual_decay=1.0)

    def test_negative_tolerance_names_field(self):
        with self.assertRaises(ValidationError) as ctx:
            EngineConfig(eps_pri=-1)
        self.assertIn("eps_pri", str(ctx.exception))

    def test_b2_needs_initial_above_final(self):
        with self.assertRaises(ValidationError):
            EngineConfig(criterion="B2", eps_dual=1e-2, eps_dual_initial=1e-3)

    def test_unknown_key(self):
        with self.assertRaises(ValidationError):
            EngineConfig(alpha=0.1)

    def test_schedules(self):
        cfg = EngineConfig(eps_dual_initial=1e-2 + 1e-5, eps_dual_decay=0.5, vmax_initial=1, vmax_growth=2, vmax_cap=6)
        self.assertAlmostEqual(cfg.eps_dual_at(1), 1e-5 + 5e-3)
        self.assertEqual(cfg.vmax_at(2), 4)
        self.assertEqual(cfg.vmax_at(5), 6)

    def test_geometric_rho_capped(self):
        cfg = EngineConfig(rho_schedule="geometric", rho_growth=3.0, rho_max=5.0)
        np.testing.assert_allclose(cfg.next_rho([1.0, 2.0]), [3.0, 5.0])

    def test_constant_rho(self):
        np.testing.assert_allclose(EngineConfig().next_rho([2.0]), [2.0])


def test_scale_penalties_warns_at_cap(caplog):
    cfg = EngineConfig(rho_schedule="geometric", rho_growth=2.0, rho_max=3.0)
    with caplog.at_level(logging.WARNING, logger="engine.config"):
        scaled = cfg.scale_penalties({0: np.array([2.0])})
    assert scaled[0][0] == 3.0
    assert not scaled[0].flags.writeable
    assert "cap" in caplog.text


class TestStopping(unittest.TestCase):
    def _state(self, primal, dual, k=1, v=1, total=1):
        zero = as_block([0.0])
        return EngineState(
            x={0: zero},
            mu={0: zero},
            rho={0: as_block([1.0])},
            x_hat=zero,
            k=k,
            v=v,
            total_inner=total,
            residuals=_report(primal, dual),
        )

    def test_optimal(self):
        verdict = stopping_check(self._state(1e-6, 1e-6), EngineConfig())
        self.assertEqual((verdict.decision, verdict.status), (Decision.TERMINATE, RunStatus.OPTIMAL))

    def test_budget_wins_ties(self):
        verdict = stopping_check(self._state(1e-6, 1e-6, total=5), EngineConfig(max_total_inner=5))
        self.assertEqual(verdict.status, RunStatus.BUDGET)

    def test_go_outer_on_small_dual(self):
        verdict = stopping_check(self._state(1.0, 1e-6), EngineConfig())
        self.assertEqual(verdict.decision, Decision.GO_OUTER)

    def test_max_outer(self):
        verdict = stopping_check(self._state(1.0, 1e-6, k=3), EngineConfig(max_outer=3))
        self.assertEqual((verdict.decision, verdict.status), (Decision.TERMINATE, RunStatus.MAX_OUTER))

    def test_continue_inner(self):
        verdict = stopping_check(self._state(1.0, 1.0), EngineConfig())
        self.assertEqual(verdict.decision, Decision.CONTINUE_INNER)

    def test_missing_residuals(self):
        state = replace(self._state(1.0, 1.0), residuals=None)
        with self.assertRaises(ParameterError):
            stopping_check(state, EngineConfig())


def test_b2_schedule_relaxes_early_loops():
    cfg = EngineConfig(criterion="B2", eps_dual_initial=1e-2 + 1e-5, eps_dual_decay=0.5)
    report = _report(1.0, 5e-3)
    assert inner_satisfied(report, 1, 1, cfg)
    assert not inner_satisfied(report, 5, 1, cfg)


@pytest.mark.parametrize(
    "criterion,v,dual,expected",
    [
        ("B4", 1, 1.0, True),
        ("B4", 0, 1.0, False),
        ("B4", 0, 1e-9, True),
        ("B3", 1, 1.0, False),
        ("B3", 2, 1.0, True),
        ("B1", 50, 1.0, False),
    ],
)
def test_inner_criteria(criterion, v, dual, expected):
    cfg = EngineConfig(criterion=criterion, vmax=1, vmax_initial=1, vmax_growth=2.0)
    assert inner_satisfied(_report(1.0, dual), 1, v, cfg) is expected


class TestResiduals(unittest.TestCase):
    def test_needs_a_sweep(self):
        zero = as_block([0.0])
        state = EngineState(x={0: zero}, mu={0: zero}, rho={0: as_block([1.0])}, x_hat=zero)
        with self.assertRaises(ParameterError):
            compute_residuals(state)

    def test_centralized_primal(self):
        state = EngineState(
            x={0: as_block([1.0]), 1: as_block([3.0])},
            mu={0: as_block([0.0]), 1: as_block([0.0])},
            rho={0: as_block([1.0]), 1: as_block([1.0])},
            x_hat=as_block([2.5]),
            v=1,
            dual_blocks=(as_block([0.25]),),
        )
        report = compute_residuals(state)
        self.assertEqual((report.primal_inf_norm, report.dual_inf_norm), (1.5, 0.25))

    def test_surrogate_value_decentralized(self):
        state = EngineState(
            x={0: as_block([1.0]), 1: as_block([3.0])},
            mu={(0, 1): as_block([0.5])},
            rho={(0, 1): as_block([2.0])},
            v=1,
        )
        # μᵀ(x0 − x1) + ‖ρ(x0 − x1)‖² with no objectives
        self.assertAlmostEqual(surrogate_value(state, {}), -1.0 + 16.0)

    def test_mismatched_edges(self):
        with self.assertRaises(ParameterError):
            EngineState(x={0: as_block([0.0])}, mu={0: as_block([0.0])}, rho={})


class TestCentralizedEngine(unittest.TestCase):
    def setUp(self):
        self.objectives = _clients()
        self.optimum = _global_least_squares(self.objectives)

    def test_admm_schedule_reaches_global_optimum(self):
        cfg = EngineConfig(criterion="B4", vmax=1, rho_initial=3.0, eps_pri=1e-10, eps_dual=1e-10, max_total_inner=5000)
        engine = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec())
        result = engine.run()
        self.assertIs(result.status, RunStatus.OPTIMAL)
        np.testing.assert_allclose(result.model, self.optimum, atol=1e-6)

    def test_exact_inner_loops_reach_global_optimum(self):
        cfg = EngineConfig(criterion="B1", rho_initial=3.0, eps_pri=1e-9, eps_dual=1e-10, max_total_inner=20000)
        engine = EngineFactory.create("centralized", self.objectives, centralized_graph(3), cfg, SolverSpec())
        result = engine.run()
        self.assertIs(result.status, RunStatus.OPTIMAL)
        np.testing.assert_allclose(result.model, self.optimum, atol=1e-6)

    def test_multipliers_sum_to_zero(self):
        cfg = EngineConfig(rho_initial=2.0)
        engine = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec())
        state = engine.initial_state()
        for _ in range(4):
            state = engine.outer_update(engine.inner_sweep(state, engine.default_sequence()))
            np.testing.assert_allclose(sum(state.mu.values()), 0.0, atol=1e-10)

    def test_single_client_recovers_minimizer(self):
        objectives = {0: self.objectives[0]}
        cfg = EngineConfig(criterion="B4", vmax=1, eps_pri=1e-10, eps_dual=1e-10, max_total_inner=5000)
        result = CentralizedEngine(objectives, centralized_graph(1), cfg, SolverSpec()).run()
        self.assertIs(result.status, RunStatus.OPTIMAL)
        np.testing.assert_allclose(result.model, _global_least_squares(objectives), atol=1e-6)

    def test_identical_clients_need_no_multipliers(self):
        same = {c: self.objectives[0] for c in range(3)}
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=50)
        engine = CentralizedEngine(same, centralized_graph(3), cfg, SolverSpec())
        state = engine.inner_sweep(engine.initial_state(), engine.default_sequence())
        np.testing.assert_allclose(state.x_hat, state.x[0])
        state = engine.outer_update(state)
        for c in range(3):
            np.testing.assert_allclose(state.mu[c], 0.0, atol=1e-12)

    def test_trace_has_one_record_per_sweep(self):
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=7, eps_pri=1e-14, eps_dual=1e-14)
        result = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec()).run()
        self.assertIs(result.status, RunStatus.BUDGET)
        self.assertEqual(len(result.trace), result.total_inner)
        self.assertEqual(result.total_inner, 7)

    def test_final_full_cycle_sweep_before_outer_update(self):
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=8, eps_pri=1e-14, eps_dual=1e-14)
        scheduler = RandomPartialScheduler(single_level([0, 1, 2]), per_sweep=1, seed=0)
        engine = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec(), scheduler=scheduler)
        result = engine.run()
        self.assertEqual([r.v for r in result.trace[:4]], [1, 2, 1, 2])

    def test_parallel_solves_match_sequential(self):
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=20)
        serial = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec()).run()
        parallel = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec(), max_workers=3).run()
        np.testing.assert_array_equal(serial.model, parallel.model)

    def test_dropout_removes_client(self):
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=10, eps_pri=1e-14, eps_dual=1e-14)
        engine = CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec())
        result = engine.run(dropout={5: [1]})
        self.assertEqual(result.state.clients, [0, 2])
        self.assertEqual(engine.graph.clients, (0, 2))

    def test_sweep_callback(self):
        seen = []
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=3)
        CentralizedEngine(self.objectives, centralized_graph(3), cfg, SolverSpec()).run(
            on_sweep=lambda state, record: seen.append(record.v)
        )
        self.assertEqual(len(seen), 3)

    def test_wrong_graph_mode(self):
        with self.assertRaises(TopologyError):
            CentralizedEngine(self.objectives, chain_graph(3), EngineConfig(), SolverSpec())

    def test_cc_sweep_requires_server_block(self):
        zero = as_block([0.0, 0.0])
        state = EngineState(x={0: zero}, mu={0: zero}, rho={0: as_block([1.0, 1.0])})
        with self.assertRaises(ParameterError):
            cc_inner_sweep(state, EngineConfig(), self.objectives, SolverSpec())
        with self.assertRaises(ParameterError):
            cc_outer_update(state, EngineConfig())


class TestDecentralizedEngine(unittest.TestCase):
    def setUp(self):
        self.objectives = _clients()
        self.optimum = _global_least_squares(self.objectives)

    def test_chain_reaches_global_optimum(self):
        cfg = EngineConfig(criterion="B1", rho_initial=3.0, eps_pri=1e-9, eps_dual=1e-10, max_total_inner=50000)
        engine = DecentralizedEngine(self.objectives, chain_graph(3), cfg, SolverSpec())
        result = engine.run()
        self.assertIs(result.status, RunStatus.OPTIMAL)
        np.testing.assert_allclose(result.model, self.optimum, atol=1e-6)
        for c in range(3):
            np.testing.assert_allclose(result.state.x[c], self.optimum, atol=1e-6)

    def test_dual_residual_skips_first_level(self):
        engine = DecentralizedEngine(self.objectives, chain_graph(3), EngineConfig(), SolverSpec())
        state = engine.inner_sweep(engine.initial_state(), engine.default_sequence())
        self.assertEqual(len(state.dual_blocks), 2)

    def test_partial_sweep_keeps_dual_of_deeper_level(self):
        engine = DecentralizedEngine(self.objectives, chain_graph(3), EngineConfig(), SolverSpec())
        middle_only = CoordinationSequence(((1,),), CoordinationMode.PARTIAL_CYCLE)
        start = engine.initial_state()
        state = engine.inner_sweep(start, middle_only)
        self.assertEqual(len(state.dual_blocks), 2)
        moved = float(np.max(np.abs(state.x[1] - start.x[1])))
        self.assertGreater(moved, 0.0)
        self.assertEqual(compute_residuals(state).dual_inf_norm, moved)

    def test_root_client_alone_has_no_dual(self):
        engine = DecentralizedEngine(self.objectives, chain_graph(3), EngineConfig(), SolverSpec())
        root_only = CoordinationSequence(((0,),), CoordinationMode.PARTIAL_CYCLE)
        state = engine.inner_sweep(engine.initial_state(), root_only)
        self.assertEqual(compute_residuals(state).dual_inf_norm, 0.0)

    def test_linearized_policies_rejected(self):
        with self.assertRaises(CapabilityError):
            DecentralizedEngine(self.objectives, chain_graph(3), EngineConfig(mu_policy="gradient"), SolverSpec())

    def test_outer_update_on_every_edge(self):
        engine = DecentralizedEngine(self.objectives, chain_graph(3), EngineConfig(rho_initial=2.0), SolverSpec())
        state = engine.inner_sweep(engine.initial_state(), engine.default_sequence())
        updated = engine.outer_update(state)
        for i, j in [(0, 1), (1, 2)]:
            np.testing.assert_allclose(updated.mu[(i, j)], 8.0 * (state.x[i] - state.x[j]))
        self.assertEqual((updated.k, updated.v), (2, 0))

    def test_mid_chain_dropout_restitches(self):
        cfg = EngineConfig(criterion="B4", vmax=1, max_total_inner=12, eps_pri=1e-14, eps_dual=1e-14)
        engine = DecentralizedEngine(self.objectives, chain_graph(3), cfg, SolverSpec())
        result = engine.run(dropout={5: [1]})
        self.assertEqual(engine.graph.edges, ((0, 2),))
        self.assertEqual(sorted(result.state.mu), [(0, 2)])
        self.assertEqual(result.total_inner, 12)

    def test_chain_of_five_converges_after_dropout(self):
        objectives = _clients(n=5)
        cfg = EngineConfig(criterion="B1", rho_initial=3.0, eps_pri=1e-8, eps_dual=1e-9, max_total_inner=100000)
        engine = DecentralizedEngine(objectives, chain_graph(5), cfg, SolverSpec())
        result = engine.run(dropout={5: [2]})
        self.assertIs(result.status, RunStatus.OPTIMAL)
        self.assertEqual(engine.graph.edges, ((0, 1), (1, 3), (3, 4)))
        self.assertLessEqual(result.state.residuals.primal_inf_norm, cfg.eps_pri)
        survivors = {c: o for c, o in objectives.items() if c != 2}
        np.testing.assert_allclose(result.model, _global_least_squares(survivors), atol=1e-6)

    def test_star_with_coordinator_matches_centralized(self):
        n = 3
        cfg = EngineConfig(rho_initial=1.5)
        cc = CentralizedEngine(self.objectives, centralized_graph(n), cfg, SolverSpec())
        members = {**self.objectives, n: None}
        dc = DecentralizedEngine(members, star_graph(n), cfg, SolverSpec())
        cc_state = cc.initial_state()
        dc_state = dc.initial_state()
        star_order = levels_from_matrix(star_matrix(n))
        for _ in range(5):
            cc_state = cc.outer_update(cc.inner_sweep(cc_state, cc.default_sequence()))
            dc_state = dc.outer_update(dc.inner_sweep(dc_state, star_order))
            np.testing.assert_allclose(dc_state.x[n], cc_state.x_hat, atol=1e-10)
            for c in range(n):
                np.testing.assert_allclose(dc_state.mu[(c, n)], -cc_state.mu[c], atol=1e-10)


@pytest.mark.parametrize("mode", ["centralized", "decentralized"])
def test_exact_sweeps_never_raise_the_surrogate(mode):
    rng = np.random.default_rng(11)
    for instance in range(100):
        n, dim = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        objectives = _clients(n=n, rows=int(rng.integers(3, 9)), dim=dim, seed=instance)
        cfg = EngineConfig(rho_initial=float(rng.uniform(0.3, 3.0)))
        if mode == "centralized":
            engine = CentralizedEngine(objectives, centralized_graph(n), cfg, SolverSpec())
        else:
            engine = DecentralizedEngine(objectives, chain_graph(n), cfg, SolverSpec())
        state = engine.initial_state(rng.normal(size=dim))
        state = replace(state, mu={key: as_block(rng.normal(size=dim)) for key in state.mu})
        previous = surrogate_value(state, objectives)
        for _ in range(6):
            state = engine.inner_sweep(state, engine.default_sequence())
            value = surrogate_value(state, objectives)
            assert value <= previous + 1e-10 * max(1.0, abs(previous)), (instance, previous, value)
            previous = value


class TestAlm(unittest.TestCase):
    def setUp(self):
        self.square = SmoothFunction(lambda x: float(x @ x), lambda x: 2.0 * x)
        self.constraint = AffineConstraint([[1.0]], [1.0])

    @staticmethod
    def exact(fun, grad, x0, tol):
        # one Newton step is exact on a quadratic
        curvature = grad(x0 + 1.0) - grad(x0)
        return x0 - grad(x0) / curvature

    def test_error_halves_each_loop(self):
        result = alm_solve(self.square, self.constraint, EngineConfig(), self.exact)
        self.assertIs(result.status, RunStatus.OPTIMAL)
        self.assertEqual(result.outer_loops, 17)
        self.assertAlmostEqual(result.trace[0].primal_inf, 0.5)
        self.assertAlmostEqual(result.trace[1].primal_inf, 0.25)
        np.testing.assert_allclose(result.mu, [-2.0], atol=1e-4)

    def test_default_bfgs_inner_solver(self):
        result = alm_solve(self.square, self.constraint, EngineConfig(max_outer=100))
        self.assertIs(result.status, RunStatus.OPTIMAL)
        np.testing.assert_allclose(result.x, [1.0], atol=1e-4)

    def test_geometric_penalty_needs_fewer_loops(self):
        cfg = EngineConfig(rho_schedule="geometric", rho_growth=2.0)
        result = alm_solve(self.square, self.constraint, cfg, self.exact)
        self.assertIs(result.status, RunStatus.OPTIMAL)
        self.assertLess(result.outer_loops, 17)

    def test_feasible_start_returns_immediately(self):
        result = alm_solve(self.square, self.constraint, EngineConfig(), self.exact, x0=[1.0])
        self.assertEqual(result.outer_loops, 0)

    def test_max_outer_keeps_state(self):
        result = alm_solve(self.square, self.constraint, EngineConfig(max_outer=3), self.exact)
        self.assertIs(result.status, RunStatus.MAX_OUTER)
        self.assertEqual(len(result.trace), 3)

    def test_accepts_local_objective(self):
        obj = LocalObjective("least-squares", [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 2)
        constraint = AffineConstraint([[1.0, 1.0]], [2.0])
        result = alm_solve(obj, constraint, EngineConfig(max_outer=200))
        np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-4)


def test_engine_result_properties():
    zero = as_block([0.0])
    state = EngineState(x={0: zero}, mu={0: zero}, rho={0: as_block([1.0])}, x_hat=as_block([2.0]), k=3, total_inner=9)
    result = EngineResult(state=state, status=RunStatus.BUDGET)
    assert (result.outer_loops, result.total_inner, float(result.model[0])) == (3, 9, 2.0)
