import numpy as np
import pytest

from csagame.costs import PlayerCostParams, build_game_costs
from csagame.errors import ConfigurationError
from csagame.game import (
    PathTables,
    SwitchingStrategy,
    certify_nep,
    compose_regimes,
    detect_banal,
    enumerate_sequences,
    evaluate_payoff,
    payoff_paths,
)
from csagame.valuation import ClaimSpec, FundingSpec, exposure_surface

from conftest import make_bundle, synthetic_costs, tiny_game_setup


def _zero_cost_setup(n_paths=6):
    bundle = make_bundle(n_paths=n_paths, lambdaA0=0.0, lambdaB0=0.0)
    claim = ClaimSpec(kind="zero")
    surface = exposure_surface(bundle, claim)
    pA = PlayerCostParams(player="A", c_to0=0.0, c_to1=0.0)
    pB = PlayerCostParams(player="B", c_to0=0.0, c_to1=0.0)
    return bundle, build_game_costs(bundle, surface, pA, pB)


def test_compose_empty_strategies_keep_initial_regime():
    bundle, _ = _zero_cost_setup()
    never = SwitchingStrategy.never(bundle.n_paths, bundle.n_steps)
    reg = compose_regimes(never, never, bundle, initial_regime=1)
    assert np.all(reg.regime == 1)


def test_compose_single_switch_flips_from_index():
    bundle, _ = _zero_cost_setup()
    a = SwitchingStrategy.from_times(bundle.n_paths, bundle.n_steps, [3], 1)
    never = SwitchingStrategy.never(bundle.n_paths, bundle.n_steps)
    reg = compose_regimes(a, never, bundle, initial_regime=1)
    assert np.all(reg.regime[:, :3] == 1)
    assert np.all(reg.regime[:, 3:] == 0)


def test_compose_simultaneous_switch_single_flip_both_charged():
    bundle, costs = _zero_cost_setup()
    both = SwitchingStrategy.from_times(bundle.n_paths, bundle.n_steps, [2], 1)
    reg = compose_regimes(both, both, bundle, initial_regime=1)
    assert np.all(reg.regime[:, 2:] == 0)
    assert np.all(reg.switch_A[:, 2]) and np.all(reg.switch_B[:, 2])

    # with a positive cost curve each electing player pays their own charge
    bundle2, surface2, pA, pB, costs2 = _setup_with_cost(c=0.02)
    both2 = SwitchingStrategy.from_times(bundle2.n_paths, bundle2.n_steps, [1], 1)
    never2 = SwitchingStrategy.never(bundle2.n_paths, bundle2.n_steps)
    reg_both = compose_regimes(both2, both2, bundle2)
    reg_one = compose_regimes(both2, never2, bundle2)
    jA_both = payoff_paths("A", reg_both, costs2)
    jA_one = payoff_paths("A", reg_one, costs2)
    np.testing.assert_allclose(jA_both, jA_one, atol=1e-14)
    jB_both = payoff_paths("B", reg_both, costs2)
    jB_one = payoff_paths("B", reg_one, costs2)
    np.testing.assert_allclose(jB_both - jB_one, 0.02, atol=1e-14)


def _setup_with_cost(c):
    return tiny_game_setup(n_paths=8, n_steps=3, c=c, lam=0.0, sigma=0.0)


def test_compose_symmetric_in_arguments():
    bundle, *_ , costs = tiny_game_setup(n_paths=10)
    rng = np.random.default_rng(0)
    ea = rng.random((10, bundle.n_steps)) < 0.3
    eb = rng.random((10, bundle.n_steps)) < 0.3
    sa = SwitchingStrategy(ea, bundle.n_steps)
    sb = SwitchingStrategy(eb, bundle.n_steps)
    r1 = compose_regimes(sa, sb, bundle)
    r2 = compose_regimes(sb, sa, bundle)
    np.testing.assert_array_equal(r1.regime, r2.regime)


def test_regime_frozen_after_default():
    bundle, *_rest, costs = tiny_game_setup(n_paths=60, n_steps=4, lam=2.0)
    assert (bundle.default_index <= 4).any()
    full = SwitchingStrategy.from_times(60, 4, [0, 2], 2)
    never = SwitchingStrategy.never(60, 4, 2)
    reg = compose_regimes(full, never, bundle)
    for p in range(60):
        d = bundle.default_index[p]
        if d <= 4:
            assert len(set(reg.regime[p, max(d - 1, 0):].tolist())) == 1


def test_zero_costs_zero_payoff_and_certified():
    bundle, costs = _zero_cost_setup()
    never = SwitchingStrategy.never(bundle.n_paths, bundle.n_steps)
    reg = compose_regimes(never, never, bundle)
    jA, _ = evaluate_payoff("A", reg, costs)
    jB, _ = evaluate_payoff("B", reg, costs)
    assert jA == 0.0 and jB == 0.0
    out = certify_nep(never, never, costs)
    assert out.certificate == "certified"


def test_payoff_matches_direct_quadrature_oracle():
    bundle, surface, pA, pB, costs = tiny_game_setup(n_paths=6, n_steps=4,
                                                     lam=0.4, sigma=0.5)
    never = SwitchingStrategy.never(6, 4)
    reg = compose_regimes(never, never, bundle)
    jB, _ = evaluate_payoff("B", reg, costs)

    # independent pathwise quadrature: no switches, regime 1 throughout
    dts = np.diff(bundle.grid)
    total = np.zeros(6)
    for p in range(6):
        d = min(bundle.default_index[p], 4)
        for k in range(d):
            total[p] += bundle.bank[k] * dts[k] * surface.bcva[p, k] ** 2
        # terminal cost in regime 1 with zero threshold is zero
    assert abs(jB - total.mean()) < 1e-12


def test_symmetric_payoffs_equal_for_shared_strategy():
    bundle, *_ , costs = tiny_game_setup(n_paths=12, lam=0.5, sigma=0.5)
    strat = SwitchingStrategy.from_times(12, bundle.n_steps, [1], 1)
    reg = compose_regimes(strat, strat, bundle)
    jA, _ = evaluate_payoff("A", reg, costs)
    jB, _ = evaluate_payoff("B", reg, costs)
    assert abs(jA - jB) < 1e-12


def test_label_swap_exchanges_payoffs_exactly():
    bundle, *_ , costs = tiny_game_setup(n_paths=16, lam=0.5, sigma=0.5)
    rng = np.random.default_rng(5)
    u = SwitchingStrategy(rng.random((16, bundle.n_steps)) < 0.25, bundle.n_steps)
    v = SwitchingStrategy(rng.random((16, bundle.n_steps)) < 0.25, bundle.n_steps)
    j_a_uv = evaluate_payoff("A", compose_regimes(u, v, bundle), costs)[0]
    j_b_vu = evaluate_payoff("B", compose_regimes(v, u, bundle), costs)[0]
    assert abs(j_a_uv - j_b_vu) < 1e-10


def test_payoff_additive_over_disjoint_path_subsets():
    bundle, *_ , costs = tiny_game_setup(n_paths=10)
    never = SwitchingStrategy.never(10, bundle.n_steps)
    reg = compose_regimes(never, never, bundle)
    paths = payoff_paths("B", reg, costs)
    j_all = paths.mean()
    j_split = 0.5 * paths[:5].mean() + 0.5 * paths[5:].mean()
    assert abs(j_all - j_split) < 1e-14


def test_malformed_strategy_rejected():
    bundle, _ = _zero_cost_setup()
    with pytest.raises(ConfigurationError):
        SwitchingStrategy(np.ones((bundle.n_paths, bundle.n_steps), bool), 1)
    good = SwitchingStrategy.never(bundle.n_paths, bundle.n_steps)
    bad_shape = SwitchingStrategy.never(bundle.n_paths, bundle.n_steps + 2)
    with pytest.raises(ConfigurationError):
        compose_regimes(good, bad_shape, bundle)


def test_enumerate_sequences_counts():
    seqs = enumerate_sequences(4, 2)
    assert seqs[0] == ()
    assert len(seqs) == 1 + 4 + 6


def test_exhaustive_certification_agrees_with_tables():
    bundle, surface, pA, pB, costs = tiny_game_setup(n_paths=5, n_steps=3,
                                                     lam=0.6, sigma=0.7, c=0.001)
    tables = PathTables(costs, max_switches=2)
    never = SwitchingStrategy.never(5, 3, 2)
    out = certify_nep(never, never, costs, exhaustive_tables=tables)
    # margins equal the mean per-path best-response improvement
    reg = compose_regimes(never, never, bundle)
    for player in ("A", "B"):
        j_paths = payoff_paths(player, reg, costs)
        best = tables.best_response_value(player, never)
        margin = out.nep_margin_A if player == "A" else out.nep_margin_B
        assert abs(margin - (j_paths - best).mean()) < 1e-12
        assert np.all(best <= j_paths + 1e-12)


def test_heuristic_certification_refutes_obvious_non_equilibrium():
    # regime 1 costs 10 per unit time, regime 0 is free and switching is
    # nearly free, so staying in regime 1 forever is clearly dominated
    bundle = make_bundle(n_paths=40, n_steps=4, lambdaA0=0.0, lambdaB0=0.0)
    costs = synthetic_costs(bundle, run0=0.0, run1=10.0, c=1e-6)
    never = SwitchingStrategy.never(40, 4)
    out = certify_nep(never, never, costs, seed=1)
    assert out.certificate == "refuted"
    assert min(out.nep_margin_A, out.nep_margin_B) > 1.0


def test_detect_banal():
    bundle, costs = _zero_cost_setup()
    never = SwitchingStrategy.never(bundle.n_paths, bundle.n_steps)
    out = certify_nep(never, never, costs)
    assert detect_banal(out) is True
    one = SwitchingStrategy.from_times(bundle.n_paths, bundle.n_steps, [1], 1)
    out2 = certify_nep(one, never, costs)
    assert detect_banal(out2) is False
    assert detect_banal(out2, eps=1.0) is True


def test_payoff_constant_shift_cancels_in_margins():
    # adding a constant to both players' terminal costs shifts payoffs but
    # leaves the certification margins untouched (margins are differences)
    bundle, surface, pA, pB, costs = tiny_game_setup(n_paths=6, n_steps=3)
    shifted = build_game_costs(bundle, surface, pA, pB)
    for pc in (shifted.A, shifted.B):
        pc.terminal[:] = pc.terminal + 0.37
    never = SwitchingStrategy.never(6, 3)
    base = certify_nep(never, never, costs, seed=3)
    bump = certify_nep(never, never, shifted, seed=3)
    assert abs(base.nep_margin_A - bump.nep_margin_A) < 1e-12
    assert abs(base.nep_margin_B - bump.nep_margin_B) < 1e-12
    assert abs((bump.jA - base.jA) - 0.37) < 1e-12
