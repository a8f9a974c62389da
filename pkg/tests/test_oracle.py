"""Randomized cross-checks of the solver against exhaustive enumeration."""

import numpy as np

from csagame.game import PathTables, certify_nep
from csagame.solver import (
    SolverConfig,
    backward_induction,
    best_response_iteration,
    brute_force_oracle,
    never_policy,
    solve_symmetric,
)

from conftest import random_tiny_instance


def test_symmetric_solver_matches_oracle_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(8):
        bundle, surface, pA, pB, costs, M = random_tiny_instance(rng, symmetric=True)
        cfg = SolverConfig(mode="symmetric", max_switches=M,
                           exact_paths=8)
        sym = solve_symmetric(bundle, surface, pA, pB, cfg)
        oracle = brute_force_oracle(costs, max_switches=M)
        assert abs(sym.value - oracle.single_agent_value) < 1e-12
        np.testing.assert_allclose(
            backward_induction("A", never_policy(bundle.n_steps, M,
                                                 bundle.n_paths),
                               costs, cfg).value0_paths,
            oracle.single_agent_paths, atol=1e-12)


def test_certified_game_outcomes_lie_in_oracle_nep_set():
    rng = np.random.default_rng(11)
    certified = refuted = 0
    for _ in range(10):
        bundle, surface, pA, pB, costs, M = random_tiny_instance(rng)
        cfg = SolverConfig(max_switches=M, exact_paths=8, br_max_iters=10)
        result = best_response_iteration(bundle, surface, pA, pB, cfg)
        oracle = brute_force_oracle(costs, max_switches=M)
        out = result.outcome
        if out.certificate == "certified":
            certified += 1
            assert oracle.has_nep
            assert oracle.contains(out.strategy_A, out.strategy_B)
        else:
            refuted += 1
        if not oracle.has_nep:
            assert out.certificate != "certified"
    assert certified > 0  # the suite must actually exercise certification


def test_symmetric_pair_of_single_agent_optimum_against_free_riding():
    # when the single-agent optimum switches, the shared-strategy pair is
    # generally not an equilibrium: the opponent can drop their elections
    rng = np.random.default_rng(13)
    seen_switching = False
    for _ in range(12):
        bundle, surface, pA, pB, costs, M = random_tiny_instance(rng, symmetric=True)
        cfg = SolverConfig(mode="symmetric", max_switches=M, exact_paths=8)
        sym = solve_symmetric(bundle, surface, pA, pB, cfg)
        if sym.strategy.switch_counts().sum() == 0:
            continue
        seen_switching = True
        tables = PathTables(costs, M)
        out = certify_nep(sym.strategy, sym.strategy, costs,
                          exhaustive_tables=tables)
        # the opponent's best response against the shared plan is at least
        # as good as free-riding on it, which saves every switching charge
        assert out.nep_margin_B >= 0.0
    assert seen_switching


def test_oracle_single_agent_never_exceeds_any_enumerated_sequence():
    rng = np.random.default_rng(17)
    bundle, surface, pA, pB, costs, M = random_tiny_instance(rng)
    oracle = brute_force_oracle(costs, max_switches=M)
    for p, tab in enumerate(oracle.tables.jA):
        assert oracle.single_agent_paths[p] <= tab[:, 0].min() + 1e-15
