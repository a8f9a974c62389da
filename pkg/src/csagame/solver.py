"""Equilibrium search by iterative optimal stopping.

Each player's problem is solved by backward induction over value surfaces
indexed by (prevailing regime, own switches left, opponent switches left):
at every decision date the player compares the one-step running cost plus
the regressed continuation against an immediate switch into the other
regime, while the opponent's frozen feedback policy may flip the regime
between decision dates.  Best responses are iterated Gauss-Seidel style
until the realized switch sets stop changing; cycling policy pairs are
reported as war-type and left uncertified.

Values are carried as time-zero amounts: running costs enter with their
bank-account quadrature weight and switching charges pre-discounted, so the
value at the root equals the payoff functional estimate directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import (
    GameCosts,
    PlayerCostParams,
    build_game_costs,
    validate_symmetry,
)
from .errors import ConfigurationError
from .game import (
    INCONCLUSIVE,
    GameOutcome,
    JointRegimePath,
    PathTables,
    SwitchingStrategy,
    certify_nep,
    compose_regimes,
    detect_banal,
    sequence_count,
)
from .market import PathBundle
from .regression import fit_conditional, poly_features
from .valuation import ExposureSurface

_STATE_VARS = {"x": "x", "lamA": "lamA", "lamB": "lamB"}


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and iteration parameters of the equilibrium search."""

    basis_degree: int = 2
    basis_vars: tuple = ("x", "lamA", "lamB")
    max_switches: int = 1
    br_max_iters: int = 10
    br_tol: float = 1e-9
    exhaustive_bound: int = 512
    exact_paths: int = 16
    mode: str = "game"            # game | symmetric | zero_sum_banal
    initial_regime: int = 1
    alternation: str = "none"     # none | sequential
    certify_tolerance: float = 1e-9
    certify_mutations: int = 16
    seed: int = 0

    def validate(self) -> None:
        if self.max_switches < 1:
            raise ConfigurationError("max_switches must be >= 1")
        if self.br_max_iters < 1:
            raise ConfigurationError("br_max_iters must be >= 1")
        if self.basis_degree < 0:
            raise ConfigurationError("basis degree must be >= 0")
        if self.mode not in ("game", "symmetric", "zero_sum_banal"):
            raise ConfigurationError(f"unknown solver mode {self.mode!r}")
        if self.alternation not in ("none", "sequential"):
            raise ConfigurationError(f"unknown alternation {self.alternation!r}")
        for v in self.basis_vars:
            if v not in _STATE_VARS:
                raise ConfigurationError(f"unknown basis variable {v!r}")

    @property
    def functional(self) -> str:
        return "linear" if self.mode == "zero_sum_banal" else "quadratic"


def never_policy(n_decisions: int, max_switches: int, n_paths: int) -> np.ndarray:
    """Feedback policy that never elects a switch."""
    return np.zeros((n_decisions, 2, max_switches + 1, max_switches + 1,
                     n_paths), dtype=bool)


def _allowed_dates(player: str, n_decisions: int, alternation: str) -> np.ndarray:
    if alternation == "none":
        return np.ones(n_decisions, dtype=bool)
    k = np.arange(n_decisions)
    return (k % 2 == 0) if player == "A" else (k % 2 == 1)


@dataclass(frozen=True)
class RegimeValueSurface:
    """Backward-induction output for one player.

    ``policy[k, z, l, m, p]`` says whether the player elects a switch at
    decision index k in prevailing regime z with l own and m opponent
    switches left.  ``v_top`` tracks the per-path value surface at full
    budgets and ``delta_k`` the compensator increments extracted as the
    positive part of the obstacle projection at each backward step.
    """

    player: str
    policy: np.ndarray       # bool (n, 2, M+1, M+1, n_paths)
    v_top: np.ndarray        # (n+1, 2, n_paths) values at budgets (M, M)
    delta_k: np.ndarray      # (n+1, 2, n_paths), zero at the terminal slice
    value0_paths: np.ndarray  # (n_paths,) root value at the initial regime
    summary: np.ndarray      # (n+1, 2, M+1) mean value per switches-left
    switch_fraction: np.ndarray  # (n, 2, M+1) electing fraction of paths
    exact: bool
    v_all: np.ndarray | None = None  # (n+1, 2, M+1, M+1, P), tiny runs only

    @property
    def value(self) -> float:
        return float(self.value0_paths.mean())

    @property
    def value_se(self) -> float:
        n = len(self.value0_paths)
        return float(self.value0_paths.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0


def backward_induction(player: str, opponent_policy: np.ndarray,
                       costs: GameCosts, config: SolverConfig) -> RegimeValueSurface:
    """Iterative optimal stopping for one player against a frozen opponent.

    For every switches-left level the value is the minimum of the one-step
    cost plus conditional continuation and the intervention branch (switch
    into the other regime at its instantaneous cost).  Conditional
    expectations use least-squares projection on a polynomial state basis;
    at or below ``config.exact_paths`` paths each path is its own atom and
    the projection is the identity (exact conditioning).
    """
    config.validate()
    bundle = costs.bundle
    pc = costs.for_player(player)
    n, P, M = bundle.n_steps, bundle.n_paths, config.max_switches
    if opponent_policy.shape != (n, 2, M + 1, M + 1, P):
        raise ConfigurationError("opponent policy shape mismatch")
    exact = P <= config.exact_paths
    allowed = _allowed_dates(player, n, config.alternation)
    d = bundle.default_index
    cols = [getattr(bundle, _STATE_VARS[v]) for v in config.basis_vars]

    policy = np.zeros((n, 2, M + 1, M + 1, P), dtype=bool)
    v_top = np.zeros((n + 1, 2, P))
    delta_k = np.zeros((n + 1, 2, P))
    summary = np.zeros((n + 1, 2, M + 1))
    switch_fraction = np.zeros((n, 2, M + 1))

    # terminal slice: cost at maturity for paths alive there, zero for paths
    # already settled at their default time
    v_next = np.zeros((2, M + 1, M + 1, P))
    at_term = d >= n
    for z in (0, 1):
        v_next[z, :, :, :] = np.where(at_term, pc.terminal[z], 0.0)
    v_top[n] = v_next[:, M, M]
    summary[n] = v_next[:, :, M].mean(axis=2)
    v_all = np.zeros((n + 1, 2, M + 1, M + 1, P)) if exact else None
    if v_all is not None:
        v_all[n] = v_next

    for k in range(n - 1, -1, -1):
        alive = d > k
        cont = v_next
        if not exact and alive.any():
            feats = poly_features([c[alive, k] for c in cols], config.basis_degree)
            targets = v_next[:, :, :, alive].reshape(-1, alive.sum()).T
            fitted = fit_conditional(feats, targets, fallback_mean=True)
            cont = v_next.copy()
            cont[:, :, :, alive] = fitted.T.reshape(2, M + 1, M + 1, alive.sum())

        v_k = np.empty_like(v_next)
        w = pc.bank_dt[k]
        for z in (0, 1):
            zf = 1 - z
            for m in range(M + 1):
                for l in range(M + 1):
                    opp = opponent_policy[k, z, m, l]  # their l = our m
                    run_ns = np.where(opp, pc.running[zf, :, k], pc.running[z, :, k])
                    cont_ns = np.where(opp, cont[zf, l, max(m - 1, 0)], cont[z, l, m])
                    no_switch = w * run_ns + cont_ns
                    if l >= 1 and allowed[k]:
                        cont_sw = np.where(opp, cont[zf, l - 1, max(m - 1, 0)],
                                           cont[zf, l - 1, m])
                        switch = pc.switch_disc[zf, k] + w * pc.running[zf, :, k] \
                            + cont_sw
                        elect = switch < no_switch
                        v = np.where(elect, switch, no_switch)
                        policy[k, z, l, m] = elect & alive
                    else:
                        v = no_switch
                    v_k[z, l, m] = v
                    if l == M and m == M:
                        delta_k[k, z] = np.maximum(no_switch - v, 0.0)

        # settle paths at or past their default time
        hit = d == k
        gone = d < k
        for z in (0, 1):
            v_k[z][:, :, hit] = pc.terminal[z, hit]
            v_k[z][:, :, gone] = 0.0
            delta_k[k, z, ~alive] = 0.0
        v_top[k] = v_k[:, M, M]
        summary[k] = v_k[:, :, M].mean(axis=2)
        denom = max(alive.sum(), 1)
        switch_fraction[k] = policy[k, :, :, M].sum(axis=2) / denom
        if v_all is not None:
            v_all[k] = v_k
        v_next = v_k

    z0 = config.initial_regime
    return RegimeValueSurface(
        player=player, policy=policy, v_top=v_top, delta_k=delta_k,
        value0_paths=v_next[z0, M, M].copy(), summary=summary,
        switch_fraction=switch_fraction, exact=exact, v_all=v_all)


def realize_policies(policy_A: np.ndarray, policy_B: np.ndarray,
                     bundle: PathBundle, config: SolverConfig
                     ) -> tuple[SwitchingStrategy, SwitchingStrategy, JointRegimePath]:
    """Play both feedback policies forward into realized switch sequences."""
    n, P, M = bundle.n_steps, bundle.n_paths, config.max_switches
    paths = np.arange(P)
    z = np.full(P, config.initial_regime, dtype=np.int64)
    lA = np.full(P, M, dtype=np.int64)
    lB = np.full(P, M, dtype=np.int64)
    elect_A = np.zeros((P, n), dtype=bool)
    elect_B = np.zeros((P, n), dtype=bool)
    for k in range(n):
        alive = bundle.default_index > k
        oA = policy_A[k, z, lA, lB, paths] & alive
        oB = policy_B[k, z, lB, lA, paths] & alive
        flip = oA | oB
        z = np.where(flip, 1 - z, z)
        lA = lA - oA.astype(np.int64)
        lB = lB - oB.astype(np.int64)
        elect_A[:, k] = oA
        elect_B[:, k] = oB
    strat_A = SwitchingStrategy(elect_A, M)
    strat_B = SwitchingStrategy(elect_B, M)
    regimes = compose_regimes(strat_A, strat_B, bundle, config.initial_regime)
    return strat_A, strat_B, regimes


@dataclass(frozen=True)
class SolveResult:
    """Converged (or aborted) best-response iteration with its surfaces."""

    outcome: GameOutcome
    surface_A: RegimeValueSurface
    surface_B: RegimeValueSurface
    regimes: JointRegimePath
    converged: bool
    iterations: int
    cycle: tuple = ()


def _opponent_value_grid(surface: RegimeValueSurface,
                         regimes: JointRegimePath | None) -> np.ndarray:
    """Opponent continuation estimate along the previously realized regime."""
    n1, _, P = surface.v_top.shape
    if regimes is None:
        return np.zeros((P, n1))
    z = regimes.regime.astype(np.int64)
    k = np.arange(n1)[None, :]
    return surface.v_top[k, z, np.arange(P)[:, None]]


def best_response_iteration(bundle: PathBundle, surface: ExposureSurface,
                            params_A: PlayerCostParams, params_B: PlayerCostParams,
                            config: SolverConfig,
                            costs: GameCosts | None = None) -> SolveResult:
    """Alternating best responses, then NEP certification of the fixed point.

    Player A responds to the opponent's current policy, then player B to
    A's fresh one; the loop stops when both realized switch sets repeat, a
    policy pair recurs with period two or more (a war-type cycle, reported
    as inconclusive), or the iteration cap is hit.  Prebuilt cost surfaces
    may be supplied; they are rebuilt per iteration only in response-
    threshold mode.
    """
    config.validate()
    n, P, M = bundle.n_steps, bundle.n_paths, config.max_switches
    response_mode = params_A is not None and \
        "response" in (params_A.delta_mode, params_B.delta_mode)

    if costs is None:
        costs = build_game_costs(bundle, surface, params_A, params_B,
                                 functional=config.functional)
    policy_B = never_policy(n, M, P)
    prev_key = None
    seen: dict[bytes, int] = {}
    regimes = None
    res_A = res_B = None
    cycle: tuple = ()
    converged = False
    iterations = 0

    for it in range(1, config.br_max_iters + 1):
        iterations = it
        if response_mode and res_A is not None:
            opp_vals = {"A": _opponent_value_grid(res_B, regimes),
                        "B": _opponent_value_grid(res_A, regimes)}
            costs = build_game_costs(bundle, surface, params_A, params_B,
                                     functional=config.functional,
                                     opponent_values=opp_vals)
        res_A = backward_induction("A", policy_B, costs, config)
        res_B = backward_induction("B", res_A.policy, costs, config)
        policy_B = res_B.policy
        strat_A, strat_B, regimes = realize_policies(res_A.policy, res_B.policy,
                                                     bundle, config)
        key = strat_A.elect.tobytes() + strat_B.elect.tobytes()
        if key == prev_key:
            converged = True
            break
        if key in seen:
            cycle = (seen[key], it)
            break
        seen[key] = it
        prev_key = key

    tables = None
    if P <= config.exact_paths and \
            sequence_count(n, M) * max(n, 1) <= config.exhaustive_bound:
        tables = PathTables(costs, M, config.initial_regime)
    outcome = certify_nep(strat_A, strat_B, costs,
                          tolerance=config.certify_tolerance,
                          exhaustive_tables=tables,
                          n_mutations=config.certify_mutations,
                          seed=config.seed,
                          initial_regime=config.initial_regime)
    certificate = outcome.certificate
    if cycle or not converged:
        certificate = INCONCLUSIVE
    outcome = GameOutcome(
        jA=outcome.jA, jA_se=outcome.jA_se, jB=outcome.jB, jB_se=outcome.jB_se,
        strategy_A=strat_A, strategy_B=strat_B,
        nep_margin_A=outcome.nep_margin_A, nep_margin_B=outcome.nep_margin_B,
        certificate=certificate, iterations=iterations, cycle=cycle,
        banal=detect_banal(outcome))
    return SolveResult(outcome=outcome, surface_A=res_A, surface_B=res_B,
                       regimes=regimes, converged=converged,
                       iterations=iterations, cycle=cycle)


@dataclass(frozen=True)
class SymmetricResult:
    value: float
    value_se: float
    strategy: SwitchingStrategy
    surface: RegimeValueSurface
    regimes: JointRegimePath


def solve_symmetric(bundle: PathBundle, surface: ExposureSurface,
                    params_A: PlayerCostParams, params_B: PlayerCostParams,
                    config: SolverConfig) -> SymmetricResult:
    """Single-agent optimal switching that both players share under symmetry.

    Requires zero constant thresholds, equal switching-cost curves, equal
    funding spreads and a positive switching-cost floor; under those
    conditions both players' cost surfaces coincide pathwise and the game
    value collapses to this control problem's value.
    """
    config.validate()
    problems = validate_symmetry(params_A, params_B, n_decisions=bundle.n_steps)
    if problems:
        raise ConfigurationError("symmetric mode validation failed: "
                                 + "; ".join(problems))
    costs = build_game_costs(bundle, surface, params_A, params_B,
                             functional=config.functional)
    never = never_policy(bundle.n_steps, config.max_switches, bundle.n_paths)
    res = backward_induction("A", never, costs, config)
    strat, _, regimes = realize_policies(res.policy, never, bundle, config)
    return SymmetricResult(value=res.value, value_se=res.value_se,
                           strategy=strat, surface=res, regimes=regimes)


@dataclass(frozen=True)
class OracleResult:
    """Exhaustive enumeration of the tiny-instance game."""

    tables: PathTables
    nep_pairs: list           # per path: list of (i, j) sequence-index pairs
    single_agent_value: float
    single_agent_paths: np.ndarray
    single_agent_times: list  # per path: optimal switch-time tuple

    @property
    def has_nep(self) -> bool:
        return all(len(p) > 0 for p in self.nep_pairs)

    def contains(self, strat_A: SwitchingStrategy, strat_B: SwitchingStrategy,
                 tol: float = 1e-12) -> bool:
        """Membership of the realized pair in the pure-NEP set, by value."""
        t = self.tables
        idx_A = t.strategy_indices(strat_A)
        idx_B = t.strategy_indices(strat_B)
        for p, (i, j) in enumerate(zip(idx_A, idx_B)):
            jA, jB = t.jA[p], t.jB[p]
            if jA[i, j] > jA[:, j].min() + tol:
                return False
            if jB[i, j] > jB[i, :].min() + tol:
                return False
        return True


def brute_force_oracle(costs: GameCosts, max_switches: int,
                       exhaustive_bound: int = 512,
                       initial_regime: int = 1,
                       tol: float = 1e-12) -> OracleResult:
    """Exact best responses, pure NEP set and single-agent optimum.

    Treats the path set as the full probability space with equal weights,
    so the game decomposes path by path and all admissible switch-time
    sequences (alternating indicators are implied by the prevailing regime)
    can be enumerated.
    """
    bundle = costs.bundle
    n = bundle.n_steps
    n_seq = sequence_count(n, max_switches)
    if n_seq * max(n, 1) > exhaustive_bound:
        raise ConfigurationError(
            f"oracle bound exceeded: {n_seq} sequences x {n} decision dates "
            f"> {exhaustive_bound}")
    tables = PathTables(costs, max_switches, initial_regime)

    nep_pairs = []
    single_paths = np.empty(bundle.n_paths)
    single_times = []
    for p in range(bundle.n_paths):
        jA, jB = tables.jA[p], tables.jB[p]
        col_min = jA.min(axis=0)   # A's best response per fixed B column
        row_min = jB.min(axis=1)   # B's best response per fixed A row
        pairs = [(i, j) for i in range(jA.shape[0]) for j in range(jA.shape[1])
                 if jA[i, j] <= col_min[j] + tol and jB[i, j] <= row_min[i] + tol]
        nep_pairs.append(pairs)
        best = int(np.argmin(jA[:, 0]))
        single_paths[p] = jA[best, 0]
        single_times.append(tables.sequences[p][best])

    return OracleResult(tables=tables, nep_pairs=nep_pairs,
                        single_agent_value=float(single_paths.mean()),
                        single_agent_paths=single_paths,
                        single_agent_times=single_times)


@dataclass(frozen=True)
class ReflectionReport:
    """Discrete residuals of the reflected-obstacle structure.

    For each player and regime: the worst violation of the switching
    obstacle (the value may never exceed the other regime's value plus the
    instantaneous switching charge) and the complementarity residual (the
    compensator may grow only where that obstacle binds).  Both vanish
    identically when the switch budget covers every decision date.
    """

    max_violation: dict
    complementarity: dict
    max_delta_k: dict
    value_scale: float

    def worst_violation(self) -> float:
        return max(self.max_violation.values())

    def worst_complementarity(self) -> float:
        return max(abs(v) for v in self.complementarity.values())

    def summary(self) -> dict:
        return {
            "max_violation": self.max_violation,
            "complementarity": self.complementarity,
            "max_delta_k": self.max_delta_k,
            "value_scale": self.value_scale,
        }


def reflection_residuals(res_A: RegimeValueSurface, res_B: RegimeValueSurface,
                         costs: GameCosts) -> ReflectionReport:
    bundle = costs.bundle
    n = bundle.n_steps
    k = np.arange(n)
    alive = k[None, :] < bundle.default_index[:, None]  # (P, n)

    max_violation = {}
    complementarity = {}
    max_dk = {}
    scale = 0.0
    for res in (res_A, res_B):
        pc = costs.for_player(res.player)
        v = res.v_top  # (n+1, 2, P)
        scale = max(scale, float(np.abs(v).max()))
        for z in (0, 1):
            zf = 1 - z
            obstacle = v[:n, zf, :] + pc.switch_disc[zf, :, None]  # (n, P)
            slack = obstacle - v[:n, z, :]
            viol = np.where(alive.T, np.maximum(-slack, 0.0), 0.0)
            dk = np.where(alive.T, res.delta_k[:n, z, :], 0.0)
            max_violation[(res.player, z)] = float(viol.max(initial=0.0))
            complementarity[(res.player, z)] = float((slack * dk).sum())
            max_dk[(res.player, z)] = float(dk.max(initial=0.0))
    return ReflectionReport(max_violation=max_violation,
                            complementarity=complementarity,
                            max_delta_k=max_dk, value_scale=scale)
