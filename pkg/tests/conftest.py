import numpy as np
import pytest

from csagame.costs import PlayerCostParams, build_game_costs
from csagame.market import CoefSpec, ModelParams, RateCurve, simulate_paths
from csagame.valuation import ClaimSpec, FundingSpec, exposure_surface


def make_params(**kw):
    defaults = dict(
        x0=1.0, lambdaA0=0.1, lambdaB0=0.1,
        mu=CoefSpec("constant", 0.0), sigma=CoefSpec("constant", 0.2),
        gamma=CoefSpec("constant", 0.0), nu=CoefSpec("constant", 0.3),
        chi=CoefSpec("constant", 0.0), eta=CoefSpec("constant", 0.3),
        r=RateCurve("constant", 0.0),
        T=1.0, n_steps=4, n_paths=64, seed=7,
    )
    defaults.update(kw)
    return ModelParams(**defaults)


def make_bundle(**kw):
    return simulate_paths(make_params(**kw))


def deterministic_bundle(n_steps=4, n_paths=3, lam=0.0, mu=0.0, r=0.0, T=1.0,
                         x0=1.0, seed=11):
    """Zero-volatility paths: every path identical, no noise anywhere."""
    return make_bundle(
        n_steps=n_steps, n_paths=n_paths, T=T, x0=x0, seed=seed,
        mu=CoefSpec("constant", mu), sigma=CoefSpec("constant", 0.0),
        nu=CoefSpec("constant", 0.0), eta=CoefSpec("constant", 0.0),
        lambdaA0=lam, lambdaB0=lam, r=RateCurve("constant", r),
    )


def tiny_game_setup(n_steps=3, n_paths=4, seed=3, c=0.01, delta=0.0,
                    sigma=0.6, lam=0.3, strike=1.0, recovery=0.2,
                    funding=None, lam_vol=0.4, mu=0.0, r=0.0,
                    functional="quadratic"):
    """Small stochastic instance with exact-conditioning-sized path count."""
    bundle = make_bundle(
        n_steps=n_steps, n_paths=n_paths, seed=seed,
        sigma=CoefSpec("constant", sigma), mu=CoefSpec("constant", mu),
        nu=CoefSpec("constant", lam_vol), eta=CoefSpec("constant", lam_vol),
        lambdaA0=lam, lambdaB0=lam, r=RateCurve("constant", r),
    )
    claim = ClaimSpec(kind="forward", strike=strike,
                      recovery_A=recovery, recovery_B=recovery)
    surface = exposure_surface(bundle, claim)
    funding = funding or FundingSpec(borrow=0.01, basis=0.002, opportunity=0.004)
    pA = PlayerCostParams(player="A", delta=delta, c_to0=c, c_to1=c, funding=funding)
    pB = PlayerCostParams(player="B", delta=delta, c_to0=c, c_to1=c, funding=funding)
    costs = build_game_costs(bundle, surface, pA, pB, functional=functional)
    return bundle, surface, pA, pB, costs


def synthetic_costs(bundle, run0=0.0, run1=0.0, term0=0.0, term1=0.0, c=0.0,
                    run0_B=None, run1_B=None, term0_B=None, term1_B=None,
                    c_B=None):
    """Hand-built cost surfaces; player B defaults to mirroring player A."""
    from csagame.costs import GameCosts, PlayerCosts

    n, P = bundle.n_steps, bundle.n_paths

    def runs(v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(v, (P, n)).copy()

    def terms(v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(v, (P,)).copy()

    def player(name, r0, r1, t0, t1, cc):
        running = np.stack([runs(r0), runs(r1)])
        terminal = np.stack([terms(t0), terms(t1)])
        switch = np.broadcast_to(np.asarray(cc, dtype=float), (2, n)).copy()
        switch = switch / bundle.bank[:n]
        return PlayerCosts(player=name, running=running, terminal=terminal,
                           switch_disc=switch,
                           bank_dt=bundle.bank[:n] * np.diff(bundle.grid))

    A = player("A", run0, run1, term0, term1, c)
    B = player("B",
               run0 if run0_B is None else run0_B,
               run1 if run1_B is None else run1_B,
               term0 if term0_B is None else term0_B,
               term1 if term1_B is None else term1_B,
               c if c_B is None else c_B)
    return GameCosts(bundle=bundle, surface=None, A=A, B=B)


def random_tiny_instance(rng, symmetric=False):
    """Random exact-conditioning instance within the oracle's reach.

    Draws where every path defaults before maturity are redrawn (the
    credit regressions need at least one surviving path per date).
    """
    from csagame.errors import RegressionError

    while True:
        n_steps = int(rng.integers(2, 5))
        n_paths = int(rng.integers(2, 7))
        M = int(rng.integers(1, 3))
        x0 = 1.0
        bundle = make_bundle(
            n_steps=n_steps, n_paths=n_paths, seed=int(rng.integers(0, 2 ** 31)),
            x0=x0,
            mu=CoefSpec("constant", float(rng.uniform(-0.1, 0.1))
                        if not symmetric else 0.0),
            sigma=CoefSpec("constant", float(rng.uniform(0.2, 1.0))),
            nu=CoefSpec("constant", float(rng.uniform(0.0, 0.6))),
            eta=CoefSpec("constant", float(rng.uniform(0.0, 0.6))),
            lambdaA0=float(rng.uniform(0.05, 0.8)),
            lambdaB0=float(rng.uniform(0.05, 0.8)),
            rho_x_lA=float(rng.uniform(-0.4, 0.4)),
            rho_x_lB=float(rng.uniform(-0.4, 0.4)),
            r=RateCurve("constant", float(rng.choice([0.0, 0.02]))),
        )
        claim = ClaimSpec(kind="forward",
                          strike=float(x0 * rng.uniform(0.7, 1.3)),
                          recovery_A=float(rng.uniform(0.0, 0.8)),
                          recovery_B=float(rng.uniform(0.0, 0.8)))
        try:
            surface = exposure_surface(bundle, claim)
        except RegressionError:
            continue
        break

    def cost_params(player):
        if symmetric:
            fund = FundingSpec(borrow=0.01, basis=0.002, opportunity=0.006)
            c0 = c1 = 0.01
            delta = 0.0
        else:
            fund = FundingSpec(borrow=float(rng.uniform(0.0, 0.02)),
                               basis=float(rng.uniform(0.0, 0.01)),
                               opportunity=float(rng.uniform(0.0, 0.02)))
            c0 = float(rng.uniform(1e-4, 0.05))
            c1 = float(rng.uniform(1e-4, 0.05))
            delta = float(rng.choice([0.0, rng.uniform(0.0, 0.1)]))
        return PlayerCostParams(player=player, delta=delta, c_to0=c0,
                                c_to1=c1, funding=fund)

    if symmetric:
        pA, pB = cost_params("A"), cost_params("B")
    else:
        pA, pB = cost_params("A"), cost_params("B")
    costs = build_game_costs(bundle, surface, pA, pB)
    return bundle, surface, pA, pB, costs, M


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
