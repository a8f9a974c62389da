"""Joint simulation of the price factor, default intensities and default times.

The model is a three-factor diffusion on a uniform time grid: one price
factor and one default intensity per counterparty, driven by correlated
Brownian increments.  Coefficients multiply the state (lognormal-style
drift/volatility), intensities are floored at zero after every Euler step,
and default times are sampled with the Cox construction from the
trapezoid-accumulated intensity.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SimulationError

_BLOCK = 8192  # paths per RNG block; fixed so results do not depend on n_jobs


@dataclass(frozen=True)
class CoefSpec:
    """Drift or volatility coefficient, evaluated as ``a + b * state``.

    ``kind`` is "constant" (b ignored) or "affine".  The coefficient value
    multiplies the state in the SDE, so a constant spec with a=mu gives the
    usual lognormal-style term ``mu * X dt``.
    """

    kind: str = "constant"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "affine"):
            raise ConfigurationError(f"unknown coefficient kind {self.kind!r}")

    def value(self, t: float, state: np.ndarray) -> np.ndarray | float:
        if self.kind == "constant":
            return self.a
        return self.a + self.b * state

    @property
    def is_state_independent(self) -> bool:
        return self.kind == "constant" or self.b == 0.0

    @classmethod
    def coerce(cls, spec) -> "CoefSpec":
        if isinstance(spec, CoefSpec):
            return spec
        if isinstance(spec, (int, float)):
            return cls("constant", float(spec))
        if isinstance(spec, dict):
            return cls(spec.get("kind", "constant"), float(spec.get("a", 0.0)),
                       float(spec.get("b", 0.0)))
        raise ConfigurationError(f"cannot interpret coefficient spec {spec!r}")


@dataclass(frozen=True)
class RateCurve:
    """Deterministic short rate: constant, or linear interpolation on knots."""

    kind: str = "constant"
    rate: float = 0.0
    times: tuple = ()
    rates: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "curve"):
            raise ConfigurationError(f"unknown rate kind {self.kind!r}")
        if self.kind == "curve":
            if len(self.times) != len(self.rates) or len(self.times) < 2:
                raise ConfigurationError("rate curve needs matching times/rates, >= 2 knots")
            if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
                raise ConfigurationError("rate curve times must be strictly increasing")

    def at(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.rate)
        return np.interp(t, self.times, self.rates)

    @classmethod
    def coerce(cls, spec) -> "RateCurve":
        if isinstance(spec, RateCurve):
            return spec
        if isinstance(spec, (int, float)):
            return cls("constant", float(spec))
        if isinstance(spec, dict):
            if "rate" in spec:
                return cls("constant", float(spec["rate"]))
            return cls("curve", 0.0, tuple(float(t) for t in spec["times"]),
                       tuple(float(r) for r in spec["rates"]))
        raise ConfigurationError(f"cannot interpret rate spec {spec!r}")


@dataclass(frozen=True)
class ModelParams:
    """Market/default dynamics and simulation grid.

    Correlations refer to the three Brownian drivers in the order
    (price, intensity A, intensity B).
    """

    x0: float = 1.0
    lambdaA0: float = 0.1
    lambdaB0: float = 0.1
    mu: CoefSpec = field(default_factory=CoefSpec)        # price drift
    sigma: CoefSpec = field(default_factory=CoefSpec)     # price vol
    gamma: CoefSpec = field(default_factory=CoefSpec)     # intensity A drift
    nu: CoefSpec = field(default_factory=CoefSpec)        # intensity A vol
    chi: CoefSpec = field(default_factory=CoefSpec)       # intensity B drift
    eta: CoefSpec = field(default_factory=CoefSpec)       # intensity B vol
    rho_x_lA: float = 0.0
    rho_x_lB: float = 0.0
    rho_lA_lB: float = 0.0
    r: RateCurve = field(default_factory=RateCurve)
    T: float = 1.0
    n_steps: int = 50
    n_paths: int = 10_000
    seed: int = 0

    def correlation_matrix(self) -> np.ndarray:
        return np.array([
            [1.0, self.rho_x_lA, self.rho_x_lB],
            [self.rho_x_lA, 1.0, self.rho_lA_lB],
            [self.rho_x_lB, self.rho_lA_lB, 1.0],
        ])

    def validate(self) -> None:
        if self.T <= 0:
            raise ConfigurationError("maturity T must be positive")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ConfigurationError("n_steps and n_paths must be >= 1")
        if self.lambdaA0 < 0 or self.lambdaB0 < 0:
            raise ConfigurationError("initial intensities must be nonnegative")
        for rho in (self.rho_x_lA, self.rho_x_lB, self.rho_lA_lB):
            if not -1.0 <= rho <= 1.0:
                raise ConfigurationError(f"correlation {rho} outside [-1, 1]")
        correlation_factor(self.correlation_matrix())  # raises if not PSD


def correlation_factor(corr: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Factor L with L L^T = corr.

    Uses Cholesky when the matrix is positive definite and falls back to an
    eigenvalue factorization for rank-deficient but PSD matrices (e.g.
    perfectly correlated drivers).
    """
    corr = np.asarray(corr, dtype=float)
    if not np.allclose(corr, corr.T):
        raise ConfigurationError("correlation matrix must be symmetric")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        pass
    eigval, eigvec = np.linalg.eigh(corr)
    if eigval.min() < -tol:
        raise ConfigurationError(
            f"correlation matrix is not positive semi-definite "
            f"(min eigenvalue {eigval.min():.3e}): {corr.tolist()}")
    return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


@dataclass(frozen=True)
class PathBundle:
    """Simulated joint paths plus Cox-sampled default times.

    Arrays are read-only; ``tau`` holds ``inf`` for paths without default up
    to T, and defaults are observed on the grid, so ``tau`` is always a grid
    point.  ``default_index`` is the grid index of tau (``n_steps + 1`` when
    no default occurs) and ``H[p, k] = 1`` exactly when ``grid[k] >= tau[p]``.
    """

    grid: np.ndarray          # (n_steps + 1,)
    x: np.ndarray             # (n_paths, n_steps + 1)
    lamA: np.ndarray
    lamB: np.ndarray
    bank: np.ndarray          # (n_steps + 1,)
    tauA: np.ndarray          # (n_paths,)
    tauB: np.ndarray
    tau: np.ndarray
    H: np.ndarray             # (n_paths, n_steps + 1) first-default indicator
    default_index: np.ndarray  # (n_paths,) int
    params: ModelParams

    def __post_init__(self):
        for arr in (self.grid, self.x, self.lamA, self.lamB, self.bank,
                    self.tauA, self.tauB, self.tau, self.H, self.default_index):
            arr.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    @property
    def n_steps(self) -> int:
        return len(self.grid) - 1

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def alive(self, k: int) -> np.ndarray:
        """Paths with no default at or before grid point k (t_k < tau)."""
        return self.default_index > k


def _euler_block(params: ModelParams, L: np.ndarray, grid: np.ndarray,
                 seed_seq: np.random.SeedSequence, start: int, stop: int,
                 x: np.ndarray, lamA: np.ndarray, lamB: np.ndarray,
                 expo: np.ndarray) -> None:
    rng = np.random.default_rng(seed_seq)
    n = stop - start
    n_steps = len(grid) - 1
    z = rng.standard_normal((n_steps, n, 3)) @ L.T
    expo[start:stop] = rng.standard_exponential((n, 2))

    x[start:stop, 0] = params.x0
    lamA[start:stop, 0] = params.lambdaA0
    lamB[start:stop, 0] = params.lambdaB0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            t = grid[k]
            dt = grid[k + 1] - grid[k]
            sq = np.sqrt(dt)
            xs = x[start:stop, k]
            la = lamA[start:stop, k]
            lb = lamB[start:stop, k]
            x[start:stop, k + 1] = xs + params.mu.value(t, xs) * xs * dt \
                + params.sigma.value(t, xs) * xs * sq * z[k, :, 0]
            lamA[start:stop, k + 1] = np.maximum(
                0.0, la + params.gamma.value(t, la) * la * dt
                + params.nu.value(t, la) * la * sq * z[k, :, 1])
            lamB[start:stop, k + 1] = np.maximum(
                0.0, lb + params.chi.value(t, lb) * lb * dt
                + params.eta.value(t, lb) * lb * sq * z[k, :, 2])
            step = np.stack([x[start:stop, k + 1], lamA[start:stop, k + 1],
                             lamB[start:stop, k + 1]])
            if not np.isfinite(step).all():
                bad = np.argwhere(~np.isfinite(step))
                path = start + int(bad[0, 1])
                raise SimulationError(
                    f"non-finite state at path {path}, step {k + 1}")


def _cox_default_times(lam: np.ndarray, grid: np.ndarray,
                       expo: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First grid time where the trapezoid-cumulated intensity exceeds an
    independent unit exponential; inf when no crossing up to T."""
    dt = np.diff(grid)
    cum = np.zeros_like(lam)
    cum[:, 1:] = np.cumsum(0.5 * (lam[:, :-1] + lam[:, 1:]) * dt, axis=1)
    crossed = cum >= expo[:, None]
    has = crossed.any(axis=1)
    first = crossed.argmax(axis=1)
    n = len(grid)
    idx = np.where(has, first, n)  # sentinel index n == n_steps + 1
    tau = np.where(has, grid[np.minimum(first, n - 1)], np.inf)
    return tau, idx


def simulate_paths(params: ModelParams, n_jobs: int = 1) -> PathBundle:
    """Generate a PathBundle by Euler-Maruyama with correlated drivers.

    Randomness is drawn in fixed-size path blocks whose streams derive only
    from ``params.seed`` and the block index, so results are bit-identical
    for any ``n_jobs``.
    """
    params.validate()
    L = correlation_factor(params.correlation_matrix())
    grid = np.linspace(0.0, params.T, params.n_steps + 1)
    n_paths, n_grid = params.n_paths, params.n_steps + 1

    x = np.empty((n_paths, n_grid))
    lamA = np.empty((n_paths, n_grid))
    lamB = np.empty((n_paths, n_grid))
    expo = np.empty((n_paths, 2))

    root = np.random.SeedSequence(params.seed)
    blocks = []
    for b, start in enumerate(range(0, n_paths, _BLOCK)):
        stop = min(start + _BLOCK, n_paths)
        blocks.append((np.random.SeedSequence(entropy=root.entropy,
                                              spawn_key=(b,)), start, stop))

    def run(block):
        ss, start, stop = block
        _euler_block(params, L, grid, ss, start, stop, x, lamA, lamB, expo)

    if n_jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run, blocks))
    else:
        for block in blocks:
            run(block)

    rates = params.r.at(grid)
    integral = np.concatenate([
        [0.0], np.cumsum(0.5 * (rates[:-1] + rates[1:]) * np.diff(grid))])
    bank = np.exp(integral)

    tauA, idxA = _cox_default_times(lamA, grid, expo[:, 0])
    tauB, idxB = _cox_default_times(lamB, grid, expo[:, 1])
    tau = np.minimum(tauA, tauB)
    default_index = np.minimum(idxA, idxB)
    H = (grid[None, :] >= tau[:, None]).astype(np.int8)

    return PathBundle(grid=grid, x=x, lamA=lamA, lamB=lamB, bank=bank,
                      tauA=tauA, tauB=tauB, tau=tau, H=H,
                      default_index=default_index, params=params)


def discount(bundle: PathBundle, t_index: int, s_index: int) -> np.ndarray:
    """Per-path discount factor B_t / B_s between two grid indices."""
    n = bundle.n_steps
    if not (0 <= t_index <= n and 0 <= s_index <= n):
        raise IndexError(f"grid index out of range (0..{n})")
    if t_index > s_index:
        raise IndexError("discount requires t_index <= s_index")
    factor = bundle.bank[t_index] / bundle.bank[s_index]
    return np.full(bundle.n_paths, factor)
