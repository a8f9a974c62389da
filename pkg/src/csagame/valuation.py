"""Clean/risky prices, CVA/DVA adjustments and collateral processes.

All surfaces are stored in the reference sign convention (the point of view
of counterparty B); views for either player are sign flips or the CVA/DVA
swap, so the bilateral antisymmetry relations hold exactly by construction.
Surfaces vanish strictly after the first default time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, RegressionError
from .market import PathBundle
from .regression import basis_size, fit_conditional, poly_features

PLAYERS = ("A", "B")


def other(player: str) -> str:
    return "B" if player == "A" else "A"


def _check_player(player: str) -> None:
    if player not in PLAYERS:
        raise ConfigurationError(f"player must be 'A' or 'B', got {player!r}")


@dataclass(frozen=True)
class ClaimSpec:
    """Promised cash flows of the underlying contract plus recovery rates.

    ``forward`` pays notional * (x_T - strike) at maturity, ``swap`` pays
    notional * (x_t - strike) * accrual at each payment time, ``zero`` pays
    nothing.  Values are quoted from the reference perspective (player B).
    At maturity the price is the settlement amount itself (cum convention),
    so terminal costs see the final mark rather than zero.
    """

    kind: str = "forward"
    strike: float = 1.0
    notional: float = 1.0
    payment_times: tuple = ()
    recovery_A: float = 0.4
    recovery_B: float = 0.4

    def validate(self, grid: np.ndarray | None = None) -> None:
        if self.kind not in ("forward", "swap", "zero"):
            raise ConfigurationError(f"unknown claim kind {self.kind!r}")
        for r in (self.recovery_A, self.recovery_B):
            if not 0.0 <= r <= 1.0:
                raise ConfigurationError("recovery rates must lie in [0, 1]")
        if self.kind == "swap" and not self.payment_times:
            raise ConfigurationError("swap claim needs payment_times")
        if grid is not None:
            for t in self.payment_times:
                if not np.isclose(grid, t).any():
                    raise ConfigurationError(f"payment time {t} not on grid")

    def flow_schedule(self, grid: np.ndarray) -> list[tuple[int, float, float]]:
        """(grid index, strike, accrual) per promised flow."""
        if self.kind == "zero":
            return []
        if self.kind == "forward":
            return [(len(grid) - 1, self.strike, 1.0)]
        idx = [int(np.argmin(np.abs(grid - t))) for t in self.payment_times]
        out = []
        prev = 0.0
        for i in sorted(idx):
            out.append((i, self.strike, grid[i] - prev))
            prev = grid[i]
        return out


@dataclass(frozen=True)
class CollateralSpec:
    """Thresholds and minimum transfer amount of the margining rule.

    Sign convention: gammaA <= 0 <= gammaB, so gammaA bounds the negative
    exposure band and gammaB the positive one.
    """

    gammaA: float = 0.0
    gammaB: float = 0.0
    mta: float = 0.0
    mode: str = "perfect"  # zero | perfect | thresholded

    def validate(self) -> None:
        if self.mode not in ("zero", "perfect", "thresholded"):
            raise ConfigurationError(f"unknown collateral mode {self.mode!r}")
        if self.mta < 0:
            raise ConfigurationError("minimum transfer amount must be >= 0")
        if not (self.gammaA <= 0.0 <= self.gammaB):
            raise ConfigurationError(
                f"thresholds must satisfy gammaA <= 0 <= gammaB, "
                f"got ({self.gammaA}, {self.gammaB})")


@dataclass(frozen=True)
class FundingSpec:
    """Funding spreads over the risk-free rate for one counterparty.

    ``borrow`` is the spread paid to fund posted collateral, ``basis`` the
    remuneration basis received on it, ``opportunity`` the premium lost on
    segregated collateral received.
    """

    borrow: float = 0.0
    basis: float = 0.0
    opportunity: float = 0.0

    def validate(self) -> list[str]:
        warnings = []
        for name, v in (("borrow", self.borrow), ("opportunity", self.opportunity)):
            if not np.isfinite(v) or not np.isfinite(self.basis):
                raise ConfigurationError("funding spreads must be finite")
            if v < 0:
                warnings.append(f"funding spread {name}={v} is negative")
        return warnings


def clean_price(bundle: PathBundle, claim: ClaimSpec, method: str = "auto",
                degree: int = 2) -> tuple[np.ndarray, str]:
    """Clean price process S_rf per path and grid point.

    Returns the array and the method actually used ("closed_form" when the
    price drift is state-independent, otherwise least-squares regression of
    realized discounted flows on a polynomial basis in the price factor).
    """
    claim.validate(bundle.grid)
    grid, bank = bundle.grid, bundle.bank
    n = bundle.n_steps
    flows = claim.flow_schedule(grid)

    can_close = bundle.params.mu.is_state_independent
    if method == "auto":
        method = "closed_form" if can_close else "regression"
    if method == "closed_form" and not can_close:
        raise ConfigurationError(
            "closed form needs a state-independent price drift")

    s_rf = np.zeros((bundle.n_paths, n + 1))
    if method == "closed_form":
        # conditional mean of the Euler scheme: E_k[x_m] = x_k * g[m] / g[k]
        growth = np.ones(n + 1)
        for k in range(n):
            dt = grid[k + 1] - grid[k]
            growth[k + 1] = growth[k] * (1.0 + bundle.params.mu.value(grid[k], 0.0) * dt)
        for k in range(n + 1):
            acc = np.zeros(bundle.n_paths)
            for i, strike, accr in flows:
                if i > k or (i == k == n):
                    df = bank[k] / bank[i]
                    fwd = bundle.x[:, k] * growth[i] / growth[k]
                    acc += df * claim.notional * (fwd - strike) * accr
            s_rf[:, k] = acc
        return s_rf, "closed_form"

    p = basis_size(1, degree)
    if bundle.n_paths < 10 * p:
        raise RegressionError(
            f"clean-price regression needs n_paths >= {10 * p} for degree {degree}")
    # realized discounted residual flows per path, then project on state
    resid = np.zeros(bundle.n_paths)
    for k in range(n, -1, -1):
        flow_here = np.zeros(bundle.n_paths)
        for i, strike, accr in flows:
            if i == k:
                flow_here = claim.notional * (bundle.x[:, k] - strike) * accr
        if k == n:
            s_rf[:, k] = flow_here
            resid = flow_here.copy()
            continue
        resid = resid * (bank[k] / bank[k + 1])
        feats = poly_features([bundle.x[:, k]], degree)
        s_rf[:, k] = fit_conditional(feats, resid)
        resid = resid + flow_here
    return s_rf, "regression"


@dataclass(frozen=True)
class ExposureSurface:
    """Clean price, credit adjustments and risky price along the paths.

    Stored in the reference (player B) convention; ``*_for`` accessors give
    either player's view.  ``s_rf_at_default`` keeps the clean price at the
    default grid point even though the killed surface is zero there.
    """

    bundle: PathBundle
    claim: ClaimSpec
    s_rf: np.ndarray
    cva: np.ndarray
    dva: np.ndarray
    bcva: np.ndarray
    s: np.ndarray
    method: str = "closed_form"
    s_rf_full: np.ndarray = field(repr=False, default=None)

    def npv_for(self, player: str) -> np.ndarray:
        _check_player(player)
        return self.s_rf_full if player == "B" else -self.s_rf_full

    def bcva_for(self, player: str) -> np.ndarray:
        _check_player(player)
        return self.bcva if player == "B" else -self.bcva

    def cva_for(self, player: str) -> np.ndarray:
        _check_player(player)
        return self.cva if player == "B" else self.dva

    def dva_for(self, player: str) -> np.ndarray:
        _check_player(player)
        return self.dva if player == "B" else self.cva


def _kill_after_default(arr: np.ndarray, bundle: PathBundle,
                        at_default_too: bool = False) -> np.ndarray:
    k = np.arange(bundle.n_steps + 1)
    d = bundle.default_index[:, None]
    dead = (k[None, :] > d) if not at_default_too else (k[None, :] >= d)
    out = arr.copy()
    out[dead] = 0.0
    return out


def bcva(bundle: PathBundle, claim: ClaimSpec, s_rf: np.ndarray,
         degree: int = 2, method: str = "closed_form") -> ExposureSurface:
    """CVA, DVA and bilateral CVA processes by least-squares projection.

    Per-path default payouts are regressed on (x, lambda_A, lambda_B) over
    the paths still alive at each grid point; the risky price is
    S = S_rf - BCVA.  Simultaneous defaults (both counterparties at the same
    grid point) feed both legs, mirroring the first-default indicators.
    """
    n = bundle.n_steps
    d = bundle.default_index
    defaulted = d <= n
    d_idx = np.minimum(d, n)
    s_rf_at_def = s_rf[np.arange(bundle.n_paths), d_idx]

    w_cva = np.where(defaulted & (bundle.tauB == bundle.tau),
                     (1.0 - claim.recovery_B) * np.maximum(-s_rf_at_def, 0.0)
                     / bundle.bank[d_idx], 0.0)
    w_dva = np.where(defaulted & (bundle.tauA == bundle.tau),
                     (1.0 - claim.recovery_A) * np.maximum(s_rf_at_def, 0.0)
                     / bundle.bank[d_idx], 0.0)

    cva = np.zeros_like(s_rf)
    dva = np.zeros_like(s_rf)
    for k in range(n):
        alive = bundle.alive(k)
        if not alive.any():
            raise RegressionError(f"no surviving paths at grid index {k}")
        if not (w_cva[alive].any() or w_dva[alive].any()):
            continue
        feats = poly_features([bundle.x[alive, k], bundle.lamA[alive, k],
                               bundle.lamB[alive, k]], degree)
        fitted = fit_conditional(feats, np.column_stack([w_cva[alive], w_dva[alive]]))
        cva[alive, k] = bundle.bank[k] * fitted[:, 0]
        dva[alive, k] = bundle.bank[k] * fitted[:, 1]

    cva = _kill_after_default(cva, bundle, at_default_too=True)
    dva = _kill_after_default(dva, bundle, at_default_too=True)
    bcva_arr = cva - dva
    s = s_rf - bcva_arr
    return ExposureSurface(
        bundle=bundle, claim=claim,
        s_rf=_kill_after_default(s_rf, bundle),
        cva=cva, dva=dva, bcva=bcva_arr,
        s=_kill_after_default(s, bundle),
        method=method, s_rf_full=s_rf)


def exposure_surface(bundle: PathBundle, claim: ClaimSpec, degree: int = 2,
                     price_method: str = "auto") -> ExposureSurface:
    """clean_price followed by bcva, the usual pipeline entry point."""
    s_rf, method = clean_price(bundle, claim, method=price_method, degree=degree)
    return bcva(bundle, claim, s_rf, degree=degree, method=method)


def _thresholded(s: np.ndarray, spec: CollateralSpec) -> np.ndarray:
    above = np.where(s > spec.gammaB + spec.mta, s - spec.gammaB, 0.0)
    below = np.where(s < spec.gammaA - spec.mta, s - spec.gammaA, 0.0)
    return above + below


def collateral(bundle: PathBundle, surface: ExposureSurface,
               spec: CollateralSpec) -> np.ndarray:
    """Collateral account along the paths for the given margining rule.

    At the default grid point the account holds the amount computed from the
    clean price at the last grid point strictly before default.
    """
    spec.validate()
    n = bundle.n_paths
    if spec.mode == "zero":
        return np.zeros_like(surface.s_rf)
    s_rf = surface.s_rf_full
    if spec.mode == "perfect":
        coll = s_rf.copy()
    else:
        coll = _thresholded(s_rf, spec)
    d = bundle.default_index
    hit = d <= bundle.n_steps
    rows = np.arange(n)[hit]
    pre = s_rf[rows, d[hit] - 1]
    coll[rows, d[hit]] = pre if spec.mode == "perfect" else _thresholded(pre, spec)
    return _kill_after_default(coll, bundle)


@dataclass(frozen=True)
class ContingentSurface:
    """Price, BCVA and collateral under a realized collateralization regime.

    Regime 0 means full collateral (clean price, no credit adjustment),
    regime 1 means zero collateral (risky price, standing BCVA).
    """

    s_c: np.ndarray
    bcva_c: np.ndarray
    coll_c: np.ndarray

    def bcva_for(self, player: str) -> np.ndarray:
        _check_player(player)
        return self.bcva_c if player == "B" else -self.bcva_c

    def coll_for(self, player: str) -> np.ndarray:
        _check_player(player)
        return self.coll_c if player == "B" else -self.coll_c


def contingent_overlay(surface: ExposureSurface, regime: np.ndarray,
                       coll: np.ndarray | None = None) -> ContingentSurface:
    """Splice the collateralized and uncollateralized surfaces by regime.

    ``regime`` holds the prevailing indicator per path and grid point;
    ``coll`` overrides the full-collateral account (defaults to the perfect
    account, i.e. the clean price with the pre-default value at default).
    """
    bundle = surface.bundle
    shape = surface.s_rf.shape
    regime = np.asarray(regime)
    if regime.shape != shape:
        raise ConfigurationError(
            f"regime path shape {regime.shape} does not match grid {shape}")
    if coll is None:
        coll = collateral(bundle, surface, CollateralSpec(mode="perfect"))
    on_full = regime == 0
    s_c = np.where(on_full, surface.s_rf, surface.s)
    bcva_c = np.where(on_full, 0.0, surface.bcva)
    coll_c = np.where(on_full, coll, 0.0)
    k = np.arange(shape[1])
    dead = k[None, :] > bundle.default_index[:, None]
    s_c[dead] = 0.0
    coll_c[dead] = 0.0
    return ContingentSurface(s_c=s_c, bcva_c=bcva_c, coll_c=coll_c)
