"""Per-player running, terminal and instantaneous switching costs.

Regime 1 (zero collateral) penalizes the squared distance of the player's
bilateral credit adjustment from the opponent threshold; regime 0 (full
collateral) penalizes the squared funding/collateral accrual gap.  The
funding factor's posting/receiving branch is keyed to the sign of the shared
reference mark while the mark itself enters with the player's own sign, so
with equal funding parameters the pre-square contents of the two players are
exact negatives of each other and the squared costs coincide pathwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .market import PathBundle
from .valuation import ExposureSurface, FundingSpec

QUADRATIC = "quadratic"
LINEAR = "linear"  # signed contents, the zero-sum (banal-case) functional


def funding_factor(t, regime, npv_sign, funding: FundingSpec):
    """Collateral funding factor R(t) while full collateral is active.

    Negative marks mean the player posts collateral and funds at the borrow
    spread; positive marks mean the player receives and bears the
    opportunity premium; a flat mark posts nothing and the factor is zero.
    Spreads enter net of the remuneration basis.
    """
    if np.any(np.asarray(regime) != 0):
        raise ContractViolation("funding_factor applies to regime 0 only")
    t = np.asarray(t, dtype=float)
    sign = np.asarray(npv_sign, dtype=float)
    post = -np.exp(-(funding.borrow - funding.basis) * t)
    receive = np.exp(-(funding.opportunity - funding.basis) * t)
    out = np.where(sign < 0, post, np.where(sign > 0, receive, 0.0))
    return out if out.shape else float(out)


def running_cost(regime, bcva_own, npv_own, r_factor, dt, delta=0.0,
                 functional: str = QUADRATIC):
    """One-interval running cost content for the given regime.

    Regime 1 uses the player's credit adjustment; regime 0 uses the one-step
    quadrature of the funding accrual minus the current mark.  The quadratic
    functional squares the content, the linear one keeps its sign.
    """
    if regime == 1:
        content = np.asarray(bcva_own) - delta
    else:
        content = np.asarray(r_factor) * np.asarray(npv_own) * dt \
            - np.asarray(npv_own) - delta
    return content ** 2 if functional == QUADRATIC else content


def terminal_cost(collateral_active, npv_own_terminal, delta=0.0,
                  functional: str = QUADRATIC):
    """Terminal cost at maturity or default."""
    if collateral_active:
        content = -np.asarray(npv_own_terminal) - delta
    else:
        content = np.zeros_like(np.asarray(npv_own_terminal, dtype=float)) - delta
    return content ** 2 if functional == QUADRATIC else content


def switching_cost(k: int, new_regime: int, cost_curve: np.ndarray,
                   bank: np.ndarray, grid: np.ndarray) -> float:
    """Discounted instantaneous cost of a switch elected at grid index k.

    Switches at or after maturity are free because they are never charged;
    per-path default cutoffs are the caller's responsibility.
    """
    if grid[k] >= grid[-1]:
        return 0.0
    return float(cost_curve[k] / bank[k]) if new_regime in (0, 1) else 0.0


@dataclass(frozen=True)
class PlayerCostParams:
    """Economic cost parameters of one player."""

    player: str = "B"
    delta: float = 0.0
    delta_mode: str = "constant"   # constant | response
    c_to0: object = 0.02           # switching-cost curve into full collateral
    c_to1: object = 0.02           # and back into zero collateral
    funding: FundingSpec = field(default_factory=FundingSpec)

    def validate(self) -> list[str]:
        if self.player not in ("A", "B"):
            raise ConfigurationError(f"player must be 'A' or 'B', got {self.player!r}")
        if self.delta_mode not in ("constant", "response"):
            raise ConfigurationError(f"unknown delta mode {self.delta_mode!r}")
        if self.delta < 0:
            raise ConfigurationError("response threshold delta must be >= 0")
        for name, c in (("c_to0", self.c_to0), ("c_to1", self.c_to1)):
            if np.any(np.asarray(c, dtype=float) < 0):
                raise ConfigurationError(f"switching cost {name} must be >= 0")
        return self.funding.validate()

    def cost_curve(self, new_regime: int, n_decisions: int) -> np.ndarray:
        raw = self.c_to0 if new_regime == 0 else self.c_to1
        arr = np.asarray(raw, dtype=float)
        if arr.ndim == 0:
            return np.full(n_decisions, float(arr))
        if len(arr) < n_decisions:
            raise ConfigurationError("switching cost curve shorter than grid")
        return arr[:n_decisions].astype(float)


def hp3_floor(*params: PlayerCostParams, n_decisions: int = 1) -> float:
    """Smallest instantaneous switching cost across players and regimes."""
    lows = []
    for p in params:
        lows.append(p.cost_curve(0, n_decisions).min())
        lows.append(p.cost_curve(1, n_decisions).min())
    return float(min(lows))


def validate_symmetry(paramsA: PlayerCostParams,
                      paramsB: PlayerCostParams,
                      n_decisions: int = 1) -> list[str]:
    """Violations of the symmetric-case hypotheses (empty list when valid)."""
    problems = []
    for p in (paramsA, paramsB):
        if p.delta_mode != "constant" or p.delta != 0.0:
            problems.append(f"player {p.player}: threshold delta must be constant 0")
    for z in (0, 1):
        ca = paramsA.cost_curve(z, n_decisions)
        cb = paramsB.cost_curve(z, n_decisions)
        if not np.array_equal(ca, cb):
            problems.append(f"switching costs into regime {z} differ between players")
    fa, fb = paramsA.funding, paramsB.funding
    if (fa.borrow, fa.basis, fa.opportunity) != (fb.borrow, fb.basis, fb.opportunity):
        problems.append("funding spreads differ between players")
    if hp3_floor(paramsA, paramsB, n_decisions=n_decisions) <= 0.0:
        problems.append("switching-cost floor violated: min c must be > 0 "
                        "in symmetric mode")
    return problems


@dataclass(frozen=True)
class PlayerCosts:
    """Realized cost surfaces of one player on a frozen bundle.

    ``running[z, p, k]`` is the regime-z cost content on interval k,
    ``terminal[z, p]`` the cost at maturity or default given prevailing
    regime z, ``switch_disc[z, k]`` the discounted charge for electing a
    switch into regime z at decision index k.
    """

    player: str
    running: np.ndarray       # (2, n_paths, n_decisions)
    terminal: np.ndarray      # (2, n_paths)
    switch_disc: np.ndarray   # (2, n_decisions)
    bank_dt: np.ndarray       # (n_decisions,) quadrature weight B_k * dt_k
    functional: str = QUADRATIC

    @property
    def n_decisions(self) -> int:
        return self.running.shape[2]

    @property
    def n_paths(self) -> int:
        return self.running.shape[1]


def build_player_costs(bundle: PathBundle, surface: ExposureSurface,
                       params: PlayerCostParams,
                       functional: str = QUADRATIC,
                       opponent_value: np.ndarray | None = None) -> PlayerCosts:
    """Evaluate one player's cost surfaces along the simulated paths.

    ``opponent_value`` feeds the response-mode threshold: the opponent's
    current continuation-value estimate, clipped at zero, replaces the
    constant delta during best-response iteration.
    """
    params.validate()
    grid, bank = bundle.grid, bundle.bank
    n = bundle.n_steps
    dts = np.diff(grid)

    if params.delta_mode == "response":
        if opponent_value is None:
            delta_grid = np.zeros((bundle.n_paths, n + 1))
        else:
            delta_grid = np.clip(opponent_value, 0.0, None)
    else:
        delta_grid = np.full((bundle.n_paths, n + 1), params.delta)

    bcva_own = surface.bcva_for(params.player)
    npv_own = surface.npv_for(params.player)
    npv_ref = surface.s_rf_full
    r_fac = funding_factor(np.broadcast_to(grid[:n], (bundle.n_paths, n)),
                           0, np.sign(npv_ref[:, :n]), params.funding)

    running = np.empty((2, bundle.n_paths, n))
    running[1] = running_cost(1, bcva_own[:, :n], None, None, None,
                              delta=delta_grid[:, :n], functional=functional)
    running[0] = running_cost(0, None, npv_own[:, :n], r_fac,
                              dts[None, :], delta=delta_grid[:, :n],
                              functional=functional)

    term_idx = np.minimum(bundle.default_index, n)
    rows = np.arange(bundle.n_paths)
    npv_term = npv_own[rows, term_idx]
    delta_term = delta_grid[rows, term_idx]
    terminal = np.stack([
        terminal_cost(True, npv_term, delta=delta_term, functional=functional),
        terminal_cost(False, npv_term, delta=delta_term, functional=functional),
    ])

    switch_disc = np.stack([
        params.cost_curve(0, n) / bank[:n],
        params.cost_curve(1, n) / bank[:n],
    ])
    # maturity indicator: a switch elected at t = T would never be charged
    switch_disc[:, grid[:n] >= grid[-1]] = 0.0

    return PlayerCosts(player=params.player, running=running,
                       terminal=terminal, switch_disc=switch_disc,
                       bank_dt=bank[:n] * dts, functional=functional)


@dataclass(frozen=True)
class GameCosts:
    """Both players' cost surfaces over one bundle."""

    bundle: PathBundle
    surface: ExposureSurface
    A: PlayerCosts
    B: PlayerCosts

    def for_player(self, player: str) -> PlayerCosts:
        return self.A if player == "A" else self.B


def build_game_costs(bundle: PathBundle, surface: ExposureSurface,
                     paramsA: PlayerCostParams, paramsB: PlayerCostParams,
                     functional: str = QUADRATIC,
                     opponent_values: dict | None = None) -> GameCosts:
    vals = opponent_values or {}
    return GameCosts(
        bundle=bundle, surface=surface,
        A=build_player_costs(bundle, surface, paramsA, functional,
                             opponent_value=vals.get("A")),
        B=build_player_costs(bundle, surface, paramsB, functional,
                             opponent_value=vals.get("B")))
