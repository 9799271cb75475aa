import unittest

import numpy as np
import pytest

from models.errors import CapabilityError, PresetError
from models.objectives import LocalObjective
from recoveries.oracles import reference_iterates
from recoveries.presets import (
    DEFAULT_MBGD_BATCH,
    PresetKind,
    build_preset,
    distributed_pa_penalties,
    penalty_for_step,
)
from recoveries.runner import build_engine, run_preset
from solvers.subproblem import PROX_WEIGHT_FLOOR

ALPHA = 0.01
STEPS = 50
X0 = np.array([0.5, -0.5])


def _problem(n, lam=0.0, seed=4):
    rng = np.random.default_rng(seed)
    return [
        LocalObjective("least-squares", rng.normal(size=(4, 2)), rng.normal(size=4), 4 * n, lam)
        for _ in range(n)
    ]


def _compare(kind, n, lam=0.0, **kwargs):
    problem = _problem(n, lam)
    preset = build_preset(kind, n, ALPHA, lam, **kwargs)
    ours = run_preset(preset, problem, X0, STEPS)
    reference = reference_iterates(kind, problem, X0, STEPS, alpha=ALPHA, lam=lam, **kwargs)
    assert len(ours) == len(reference) == STEPS + 1
    for step, (a, b) in enumerate(zip(ours, reference, strict=True)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-10, err_msg=f"{kind} differs at step {step}")


@pytest.mark.parametrize(
    "kind,n,lam",
    [
        ("PA", 1, 0.0),
        ("GD", 1, 0.0),
        ("NM", 1, 0.0),
        ("PG", 1, 0.3),
        ("MBGD", 3, 0.0),
        ("SGD", 3, 0.0),
        ("FedProx", 3, 0.0),
        ("FedAvg", 3, 0.0),
        ("DGD", 3, 0.2),
        ("BCGD", 3, 0.2),
    ],
)
def test_preset_matches_reference(kind, n, lam):
    _compare(kind, n, lam)


def test_local_gd_with_several_local_passes():
    _compare("LocalGD", 3, passes=3)


@pytest.mark.parametrize("batch", [1, 2, 3])
def test_mbgd_batch_sizes(batch):
    _compare("MBGD", 3, batch=batch)


def test_fedavg_averages_exact_local_minimizers():
    problem = _problem(3)
    ours = run_preset(build_preset("FedAvg", 3, ALPHA), problem, X0, 2)
    minimizers = [np.linalg.lstsq(obj.features, obj.targets, rcond=None)[0] for obj in problem]
    np.testing.assert_allclose(ours[1], np.mean(minimizers, axis=0), rtol=0, atol=1e-10)
    np.testing.assert_allclose(ours[2], ours[1], rtol=0, atol=1e-12)


def test_fedavg_on_identical_clients_returns_the_local_minimizer():
    shared = _problem(1)[0]
    problem = [LocalObjective("least-squares", shared.features, shared.targets, 8) for _ in range(2)]
    ours = run_preset(build_preset("FedAvg", 2, ALPHA), problem, X0, 1)
    expected = np.linalg.lstsq(shared.features, shared.targets, rcond=None)[0]
    np.testing.assert_allclose(ours[-1], expected, rtol=0, atol=1e-10)


def test_fedprox_with_per_client_steps():
    alphas = [0.01, 0.02, 0.05]
    problem = _problem(3)
    preset = build_preset("FedProx", 3, ALPHA)
    ours = run_preset(preset, problem, X0, STEPS, alphas=alphas)
    reference = reference_iterates("FedProx", problem, X0, STEPS, alpha=ALPHA, alphas=alphas)
    for a, b in zip(ours, reference, strict=True):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)


def test_random_presets_are_seeded():
    problem = _problem(3)
    first = run_preset(build_preset("SGD", 3, ALPHA, seed=11), problem, X0, STEPS)
    second = run_preset(build_preset("SGD", 3, ALPHA, seed=11), problem, X0, STEPS)
    np.testing.assert_array_equal(first[-1], second[-1])


class TestBuildPreset(unittest.TestCase):
    def test_penalty_matches_step(self):
        self.assertAlmostEqual(2.0 * penalty_for_step(0.125) ** 2, 8.0)

    def test_common_configuration(self):
        preset = build_preset("GD", 1, 0.1, steps=50)
        self.assertEqual((preset.config.criterion, preset.config.vmax), ("B4", 1))
        self.assertEqual(preset.config.max_total_inner, 50)
        self.assertAlmostEqual(preset.config.rho_initial, penalty_for_step(0.1))
        self.assertEqual(preset.mu_policy, "gradient")

    def test_graphs(self):
        self.assertTrue(build_preset("FedProx", 3, 0.1).graph.is_centralized)
        self.assertEqual(build_preset("BCGD", 3, 0.1).graph.edges, ((0, 1), (1, 2)))
        self.assertEqual(build_preset("PG", 1, 0.1).graph.n, 1)
        self.assertTrue(build_preset("DGD", 2, 0.1).iterates_blocks)

    def test_fedavg_prox_weight_below_floor(self):
        preset = build_preset("FedAvg", 4, 0.1)
        self.assertEqual(preset.solver.kind, "exact-descent")
        self.assertGreater(preset.solver.penalty_scale, 0.0)
        self.assertLess(preset.solver.penalty_scale * preset.config.rho_initial**2, PROX_WEIGHT_FLOOR)
        self.assertEqual(preset.weights, (0.25, 0.25, 0.25, 0.25))

    def test_local_gd_drops_prox_term(self):
        preset = build_preset("LocalGD", 4, 0.1, passes=5)
        self.assertEqual((preset.solver.kind, preset.solver.penalty_scale), ("bcpg", 0.0))
        self.assertEqual(preset.solver.passes, 5)

    def test_mbgd_and_sgd_differ_in_batch(self):
        self.assertEqual(build_preset("MBGD", 4, 0.1).per_sweep, DEFAULT_MBGD_BATCH)
        self.assertEqual(build_preset("MBGD", 4, 0.1, batch=3).per_sweep, 3)
        self.assertEqual(build_preset("SGD", 4, 0.1).per_sweep, 1)

    def test_batch_validation(self):
        with self.assertRaises(PresetError):
            build_preset("SGD", 3, 0.1, batch=2)
        with self.assertRaises(PresetError):
            build_preset("MBGD", 3, 0.1, batch=4)

    def test_unknown_kind(self):
        with self.assertRaises(PresetError):
            build_preset("Adam", 2, 0.1)

    def test_single_client_kinds(self):
        with self.assertRaises(PresetError):
            build_preset(PresetKind.PA, 2, 0.1)

    def test_federated_kinds_need_two_clients(self):
        with self.assertRaises(PresetError):
            build_preset(PresetKind.FEDAVG, 1, 0.1)

    def test_smooth_only_kinds_reject_l1(self):
        with self.assertRaises(PresetError):
            build_preset("GD", 1, 0.1, lam=0.5)

    def test_bad_step(self):
        with self.assertRaises(PresetError):
            build_preset("PA", 1, 0.0)

    def test_per_client_penalties(self):
        self.assertEqual(distributed_pa_penalties([0.5, 0.125]), [1.0, 2.0])
        with self.assertRaises(PresetError):
            distributed_pa_penalties([0.1, -1.0])


class TestRunner(unittest.TestCase):
    def test_objective_count_must_match(self):
        with self.assertRaises(PresetError):
            build_engine(build_preset("FedProx", 3, 0.1), _problem(2))

    def test_l1_weight_must_match(self):
        with self.assertRaises(PresetError):
            build_engine(build_preset("DGD", 2, 0.1, lam=0.1), _problem(2))

    def test_step_sizes_only_for_fedprox(self):
        with self.assertRaises(PresetError):
            run_preset(build_preset("FedAvg", 2, 0.1), _problem(2), X0, 1, alphas=[0.1, 0.1])

    def test_oracle_size_limits(self):
        with self.assertRaises(CapabilityError):
            reference_iterates("GD", _problem(1), X0, 1001, alpha=0.1)
