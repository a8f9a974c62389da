"""Switching strategies, joint regime paths, payoffs and NEP certification.

A strategy is stored as a boolean election matrix over (path, decision
index): electing at k flips the prevailing regime on the interval starting
at t_k.  Because both players always see the same prevailing regime, a
switch always targets the opposite regime, simultaneous elections flip the
regime once, and every electing player pays their own instantaneous cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .costs import GameCosts, PlayerCosts
from .errors import ConfigurationError
from .market import PathBundle

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SwitchingStrategy:
    """Per-path switch elections with a hard budget of at most M switches."""

    elect: np.ndarray  # bool (n_paths, n_decisions)
    max_switches: int

    def __post_init__(self):
        counts = self.elect.sum(axis=1)
        if counts.max(initial=0) > self.max_switches:
            raise ConfigurationError(
                f"strategy elects more than M={self.max_switches} switches")

    @classmethod
    def never(cls, n_paths: int, n_decisions: int,
              max_switches: int = 1) -> "SwitchingStrategy":
        return cls(np.zeros((n_paths, n_decisions), dtype=bool), max_switches)

    @classmethod
    def from_times(cls, n_paths: int, n_decisions: int, indices,
                   max_switches: int) -> "SwitchingStrategy":
        """Calendar strategy electing at the same grid indices on all paths."""
        elect = np.zeros((n_paths, n_decisions), dtype=bool)
        for k in indices:
            elect[:, k] = True
        return cls(elect, max_switches)

    def switch_counts(self) -> np.ndarray:
        return self.elect.sum(axis=1)


@dataclass(frozen=True)
class JointRegimePath:
    """Prevailing regime per (path, grid point) plus switch attribution.

    ``regime[:, k]`` is the regime in force on [t_k, t_{k+1}) after the
    simultaneous moves at t_k; the final column repeats the terminal regime.
    Elections after the first default are void and the regime freezes.
    """

    regime: np.ndarray    # int8 (n_paths, n_steps + 1)
    switch_A: np.ndarray  # bool (n_paths, n_decisions), realized elections
    switch_B: np.ndarray
    initial_regime: int

    @property
    def terminal_regime(self) -> np.ndarray:
        return self.regime[:, -1]


def decision_alive_mask(bundle: PathBundle) -> np.ndarray:
    """True where a switch may still be elected (strictly before default)."""
    k = np.arange(bundle.n_steps)
    return k[None, :] < bundle.default_index[:, None]


def compose_regimes(strat_A: SwitchingStrategy, strat_B: SwitchingStrategy,
                    bundle: PathBundle, initial_regime: int = 1) -> JointRegimePath:
    """OR-composition of the two players' elections into one regime path."""
    n = bundle.n_steps
    if strat_A.elect.shape != (bundle.n_paths, n) or \
            strat_B.elect.shape != (bundle.n_paths, n):
        raise ConfigurationError("strategy shape does not match the bundle grid")
    if initial_regime not in (0, 1):
        raise ConfigurationError("initial regime must be 0 or 1")
    alive = decision_alive_mask(bundle)
    ea = strat_A.elect & alive
    eb = strat_B.elect & alive
    flips = (ea | eb).astype(np.int64)
    parity = np.cumsum(flips, axis=1) % 2
    regime = np.empty((bundle.n_paths, n + 1), dtype=np.int8)
    regime[:, :n] = (initial_regime + parity) % 2
    regime[:, n] = regime[:, n - 1] if n >= 1 else initial_regime
    return JointRegimePath(regime=regime, switch_A=ea, switch_B=eb,
                           initial_regime=initial_regime)


def payoff_paths(player: str, regimes: JointRegimePath,
                 costs: GameCosts) -> np.ndarray:
    """Pathwise cost functional: bank-weighted running quadrature over the
    surviving intervals, discounted elected switching charges, and the
    terminal cost at maturity or default."""
    pc = costs.for_player(player)
    bundle = costs.bundle
    n = bundle.n_steps
    z = regimes.regime[:, :n]
    accrue = decision_alive_mask(bundle)
    running = np.where(z == 1, pc.running[1], pc.running[0])
    total = (running * accrue * pc.bank_dt[None, :]).sum(axis=1)

    elect = regimes.switch_A if player == "A" else regimes.switch_B
    charge = np.where(z == 0, pc.switch_disc[0][None, :],
                      pc.switch_disc[1][None, :])
    total += (charge * elect).sum(axis=1)

    z_term = regimes.terminal_regime
    total += np.where(z_term == 0, pc.terminal[0], pc.terminal[1])
    return total


def evaluate_payoff(player: str, regimes: JointRegimePath,
                    costs: GameCosts) -> tuple[float, float]:
    """Monte-Carlo estimate of J for one player: (mean, standard error)."""
    per_path = payoff_paths(player, regimes, costs)
    n = len(per_path)
    se = float(per_path.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(per_path.mean()), se


@dataclass(frozen=True)
class GameOutcome:
    """Estimated payoffs, equilibrium strategies and certification result."""

    jA: float
    jA_se: float
    jB: float
    jB_se: float
    strategy_A: SwitchingStrategy
    strategy_B: SwitchingStrategy
    nep_margin_A: float
    nep_margin_B: float
    certificate: str
    iterations: int = 0
    cycle: tuple = ()
    banal: bool | None = None

    def summary(self) -> dict:
        def strat_info(s):
            counts = s.switch_counts()
            return {
                "max_switches": int(s.max_switches),
                "mean_switches": float(counts.mean()),
                "paths_with_switch": float((counts > 0).mean()),
            }

        return {
            "payoffs": {"A": {"estimate": self.jA, "se": self.jA_se},
                        "B": {"estimate": self.jB, "se": self.jB_se}},
            "nep_margins": {"A": self.nep_margin_A, "B": self.nep_margin_B},
            "certificate": self.certificate,
            "iterations": self.iterations,
            "cycle_detected": bool(self.cycle),
            "banal": self.banal,
            "strategies": {"A": strat_info(self.strategy_A),
                           "B": strat_info(self.strategy_B)},
        }


def enumerate_sequences(n_decisions: int, max_switches: int) -> list[tuple]:
    """All ordered switch-time sets with at most max_switches elections."""
    out = [()]
    for m in range(1, max_switches + 1):
        out.extend(combinations(range(n_decisions), m))
    return out


def sequence_count(n_decisions: int, max_switches: int) -> int:
    from math import comb
    return sum(comb(n_decisions, m) for m in range(max_switches + 1))


def _path_cost(pc: PlayerCosts, own: tuple, opp: tuple, path: int,
               alive_n: int, z0: int, bank_dt: np.ndarray) -> float:
    """Pathwise cost of a (own, opponent) switch-time pair on one path."""
    total = 0.0
    z = z0
    own_set, opp_set = set(own), set(opp)
    n = pc.n_decisions
    for k in range(n):
        if k >= alive_n:
            break
        if k in own_set or k in opp_set:
            z = 1 - z
            if k in own_set:
                total += pc.switch_disc[z, k]
        total += bank_dt[k] * pc.running[z, path, k]
    total += pc.terminal[z, path]
    return total


class PathTables:
    """Exact per-path payoff tables over all admissible sequence pairs.

    With exact conditioning every path is its own atom, so the game
    decomposes across paths: each path carries a finite bimatrix of costs
    over (own sequence, opponent sequence) pairs restricted to decision
    times strictly before that path's default.
    """

    def __init__(self, costs: GameCosts, max_switches: int,
                 initial_regime: int = 1):
        bundle = costs.bundle
        n = bundle.n_steps
        self.initial_regime = initial_regime
        self.max_switches = max_switches
        self.n_decisions = n
        self.alive_n = np.minimum(bundle.default_index, n)
        self.sequences = []   # per path: list of admissible switch-time sets
        self.jA = []          # per path: (nseq, nseq) cost tables, rows = A
        self.jB = []
        for p in range(bundle.n_paths):
            seqs = enumerate_sequences(int(self.alive_n[p]), max_switches)
            tA = np.empty((len(seqs), len(seqs)))
            tB = np.empty((len(seqs), len(seqs)))
            for i, sa in enumerate(seqs):
                for j, sb in enumerate(seqs):
                    tA[i, j] = _path_cost(costs.A, sa, sb, p, self.alive_n[p],
                                          initial_regime, costs.A.bank_dt)
                    tB[i, j] = _path_cost(costs.B, sb, sa, p, self.alive_n[p],
                                          initial_regime, costs.B.bank_dt)
            self.sequences.append(seqs)
            self.jA.append(tA)
            self.jB.append(tB)

    def sequence_index(self, path: int, times: tuple) -> int:
        return self.sequences[path].index(tuple(sorted(times)))

    def strategy_indices(self, strat: SwitchingStrategy) -> list[int]:
        idx = []
        for p in range(len(self.sequences)):
            times = tuple(np.nonzero(strat.elect[p, :self.alive_n[p]])[0])
            idx.append(self.sequence_index(p, times))
        return idx

    def best_response_value(self, player: str, opp_strategy: SwitchingStrategy):
        """Per-path minimal cost against the opponent's realized sequences.

        Both tables are laid out [a_index, b_index], so A minimizes down a
        column of jA and B along a row of jB.
        """
        opp_idx = self.strategy_indices(opp_strategy)
        vals = np.empty(len(self.sequences))
        for p, j in enumerate(opp_idx):
            if player == "A":
                vals[p] = self.jA[p][:, j].min()
            else:
                vals[p] = self.jB[p][j, :].min()
        return vals


def strategies_from_indices(tables: PathTables, indices: list[int],
                            n_paths: int, n_decisions: int,
                            max_switches: int) -> SwitchingStrategy:
    elect = np.zeros((n_paths, n_decisions), dtype=bool)
    for p, i in enumerate(indices):
        for k in tables.sequences[p][i]:
            elect[p, k] = True
    return SwitchingStrategy(elect, max_switches)


def _calendar_deviations(strat: SwitchingStrategy, alive: np.ndarray,
                         rng: np.random.Generator,
                         n_mutations: int) -> list[SwitchingStrategy]:
    """Toggle/shift/never edits plus random mutations of a strategy."""
    n_paths, n = strat.elect.shape
    M = strat.max_switches
    devs = [SwitchingStrategy.never(n_paths, n, M)]
    for k in range(n):
        elect = strat.elect.copy()
        elect[:, k] = ~elect[:, k]
        elect &= alive
        over = elect.sum(axis=1) > M
        elect[over] = strat.elect[over]
        devs.append(SwitchingStrategy(elect, M))
    for shift in (-1, 1):
        elect = np.roll(strat.elect, shift, axis=1)
        if shift == 1:
            elect[:, 0] = False
        else:
            elect[:, -1] = False
        devs.append(SwitchingStrategy(elect & alive, M))
    for _ in range(n_mutations):
        elect = np.zeros((n_paths, n), dtype=bool)
        count = rng.integers(0, M + 1)
        if count and n:
            cols = rng.choice(n, size=min(count, n), replace=False)
            elect[:, cols] = True
        devs.append(SwitchingStrategy(elect & alive, M))
    return devs


def certify_nep(strat_A: SwitchingStrategy, strat_B: SwitchingStrategy,
                costs: GameCosts, tolerance: float = 1e-9,
                exhaustive_tables: PathTables | None = None,
                n_mutations: int = 16, seed: int = 0,
                initial_regime: int = 1) -> GameOutcome:
    """Check the candidate pair against unilateral deviations.

    With exhaustive tables the margins are exact per-path best responses;
    otherwise a calendar deviation family (toggles at every grid point,
    +-1 shifts, never-switch, random mutations) bounds the improvement.
    Margins use common random numbers: every payoff is evaluated on the
    same frozen bundle, so candidate/deviation differences are exact paired
    samples.
    """
    bundle = costs.bundle
    regimes = compose_regimes(strat_A, strat_B, bundle, initial_regime)
    jA_paths = payoff_paths("A", regimes, costs)
    jB_paths = payoff_paths("B", regimes, costs)
    n_paths = bundle.n_paths

    margins = {}
    bands = {}
    for player, strat, opp, j_paths in (("A", strat_A, strat_B, jA_paths),
                                        ("B", strat_B, strat_A, jB_paths)):
        if exhaustive_tables is not None:
            best = exhaustive_tables.best_response_value(player, opp)
            diff = j_paths - best          # >= 0 where a deviation improves
            margins[player] = float(diff.mean())
            bands[player] = 0.0
        else:
            rng = np.random.default_rng(seed + (0 if player == "A" else 1))
            alive = decision_alive_mask(bundle)
            best_gain = -np.inf
            best_diff = None
            for dev in _calendar_deviations(strat, alive, rng, n_mutations):
                if player == "A":
                    reg = compose_regimes(dev, opp, bundle, initial_regime)
                else:
                    reg = compose_regimes(opp, dev, bundle, initial_regime)
                dev_paths = payoff_paths(player, reg, costs)
                diff = j_paths - dev_paths
                gain = float(diff.mean())
                if gain > best_gain:
                    best_gain = gain
                    best_diff = diff
            margins[player] = best_gain
            se = float(best_diff.std(ddof=1) / np.sqrt(n_paths)) \
                if n_paths > 1 else 0.0
            bands[player] = 2.0 * se

    worst = max(margins["A"], margins["B"])
    if worst <= tolerance:
        certificate = CERTIFIED
    elif worst > tolerance + max(bands["A"], bands["B"]):
        certificate = REFUTED
    else:
        certificate = INCONCLUSIVE

    nA = len(jA_paths)
    return GameOutcome(
        jA=float(jA_paths.mean()),
        jA_se=float(jA_paths.std(ddof=1) / np.sqrt(nA)) if nA > 1 else 0.0,
        jB=float(jB_paths.mean()),
        jB_se=float(jB_paths.std(ddof=1) / np.sqrt(nA)) if nA > 1 else 0.0,
        strategy_A=strat_A, strategy_B=strat_B,
        nep_margin_A=margins["A"], nep_margin_B=margins["B"],
        certificate=certificate)


def detect_banal(outcome: GameOutcome, eps: float = 0.0) -> bool:
    """True when both equilibrium strategies never switch on enough paths."""
    quiet = (outcome.strategy_A.switch_counts() == 0) \
        & (outcome.strategy_B.switch_counts() == 0)
    return bool(quiet.mean() >= 1.0 - eps)
