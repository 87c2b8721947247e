"""Localization-error bound and Monte Carlo convergence measurements.

The achievable localization rate of a bisection search against an answer
channel that lies with probability epsilon is governed by the binary
symmetric channel capacity C(epsilon) = 1 - H(epsilon) (bits).  The mean
squared error of the median estimate after n queries over d dimensions is
bounded below by K * d * exp(-2 n C(epsilon) / d) for some constant K.  The
constant is not known in closed form, so :func:`calibrate_bound` anchors it
at n = 0, turning the bound into a falsifiable shape check against the
Monte Carlo curves produced by :func:`run_mc`.

All errors are measured in bin^2 units of the belief grid.  The bound is
checked only under the constant-epsilon channel oracle; the image pipeline
produces a varying epsilon per query, for which no claim is made.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import belief as belief_mod
from . import engine as engine_mod
from .belief import EPS_MIN
from .oracles import BscOracle


class InsufficientDataError(ValueError):
    """Too few usable points for the requested fit."""


def capacity(epsilon: float) -> float:
    """Binary symmetric channel capacity 1 - H(epsilon), in bits.

    H(0) = H(1) = 0 by continuity; the domain is restricted to [0, 0.5].
    """
    if not (0.0 <= epsilon <= 0.5):
        raise ValueError(f"epsilon must be in [0, 0.5], got {epsilon}")
    if epsilon == 0.0:
        return 1.0
    entropy = -(epsilon * math.log2(epsilon) + (1.0 - epsilon) * math.log2(1.0 - epsilon))
    return 1.0 - entropy


@dataclass(frozen=True)
class BoundParams:
    """Parameters of the error lower bound: scale K, dimension d, channel epsilon."""

    K: float
    d: int
    epsilon: float

    def __post_init__(self) -> None:
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if not (0.0 <= self.epsilon < 0.5):
            raise ValueError(f"epsilon must be in [0, 0.5), got {self.epsilon}")


def mse_lower_bound(n: int, params: BoundParams) -> float:
    """K * d * exp(-2 n C(epsilon) / d): the least achievable MSE after n queries."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return params.K * params.d * math.exp(-2.0 * n * capacity(params.epsilon) / params.d)


@dataclass(frozen=True)
class MseCurve:
    """Mean squared error of the median estimate versus query count."""

    n: np.ndarray
    mse: np.ndarray
    trials: int

    def __post_init__(self) -> None:
        n = np.array(self.n, dtype=np.int64, copy=True)
        mse = np.array(self.mse, dtype=np.float64, copy=True)
        if n.ndim != 1 or mse.ndim != 1 or n.size != mse.size:
            raise ValueError("n and mse must be 1-D arrays of equal length")
        if np.any(np.diff(n) <= 0):
            raise ValueError("n must be strictly increasing")
        if np.any(mse < 0) or not np.all(np.isfinite(mse)):
            raise ValueError("mse entries must be finite and >= 0")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        n.flags.writeable = False
        mse.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "mse", mse)


def _clamp_eps(eps: float) -> float:
    return min(max(eps, EPS_MIN), 0.5 - EPS_MIN)


def _trial_errors_1d(
    n_bins: int, eps_true: float, n_max: int, rng: np.random.Generator
) -> np.ndarray:
    """Squared median error after 0..n_max queries on one random target."""
    target = int(rng.integers(1, n_bins + 1))
    b = belief_mod.uniform(n_bins)
    eps_update = _clamp_eps(eps_true)
    errors = np.empty(n_max + 1)
    errors[0] = (belief_mod.median_bin(b) - target) ** 2
    for n in range(1, n_max + 1):
        split = belief_mod.bisection_point(b)
        low_side = bool(rng.random() < 0.5)
        lo, hi = (1, split) if low_side else (split + 1, n_bins)
        truth = 1 if lo <= target <= hi else 0
        y = truth ^ bool(rng.random() < eps_true)
        b = belief_mod.update(b, (lo, hi), y, eps_update)
        errors[n] = (belief_mod.median_bin(b) - target) ** 2
    return errors


def _trial_errors_2d(
    dims: tuple[int, int], eps_true: float, n_max: int, rng: np.random.Generator
) -> np.ndarray:
    """Squared L2 median error after 0..n_max alternating-axis queries."""
    n_rows, n_cols = dims
    target = (int(rng.integers(1, n_rows + 1)), int(rng.integers(1, n_cols + 1)))
    oracle = BscOracle(target, eps_true, rng)
    beliefs = (belief_mod.uniform(n_rows), belief_mod.uniform(n_cols))
    errors = np.empty(n_max + 1)
    med = (belief_mod.median_bin(beliefs[0]), belief_mod.median_bin(beliefs[1]))
    errors[0] = (med[0] - target[0]) ** 2 + (med[1] - target[1]) ** 2
    for n in range(1, n_max + 1):
        axis = "rows" if n % 2 == 1 else "cols"
        beliefs, row = engine_mod.step(beliefs, axis, oracle, dims, rng, t=n)
        errors[n] = (row.median_row - target[0]) ** 2 + (row.median_col - target[1]) ** 2
    return errors


def run_mc(
    grid_dims: int | tuple[int, ...],
    eps_true: float,
    n_max: int,
    trials: int,
    seed: int,
) -> MseCurve:
    """Average squared median error over independent localization trials.

    Each trial draws a uniform random target, runs the bisection search
    against the constant-epsilon channel oracle (belief updates use the same
    epsilon, clamped away from 0), and records the squared error of the
    median estimate after every query.  Trial i uses rng stream seed + i.

    ``grid_dims`` is an int or 1-tuple for a 1-D grid, or a 2-tuple
    (rows, cols) for the alternating-axis 2-D search.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    dims = (grid_dims,) if isinstance(grid_dims, int) else tuple(grid_dims)
    if len(dims) not in (1, 2):
        raise ValueError(f"grid_dims must be 1-D or 2-D, got {dims}")
    total = np.zeros(n_max + 1)
    for trial in range(trials):
        rng = np.random.default_rng(seed + trial)
        if len(dims) == 1:
            total += _trial_errors_1d(dims[0], eps_true, n_max, rng)
        else:
            total += _trial_errors_2d((dims[0], dims[1]), eps_true, n_max, rng)
    return MseCurve(n=np.arange(n_max + 1), mse=total / trials, trials=trials)


def calibrate_bound(curve: MseCurve, d: int, epsilon: float) -> BoundParams:
    """Anchor the bound at the start of the curve: K = mse(n_first) / d."""
    if curve.n[0] != 0:
        raise ValueError("calibration requires a curve starting at n = 0")
    if curve.mse[0] <= 0:
        raise ValueError("cannot calibrate on a zero starting MSE")
    return BoundParams(K=float(curve.mse[0]) / d, d=d, epsilon=epsilon)


def fit_decay_rate(
    curve: MseCurve, n_window: tuple[int, int] | None = None
) -> float:
    """Least-squares slope of ln(mse) versus n, skipping zero entries.

    ``n_window`` restricts the fit to n in [lo, hi] inclusive.  Raises
    InsufficientDataError with fewer than 3 usable points.
    """
    usable = curve.mse > 0
    if n_window is not None:
        lo, hi = n_window
        usable &= (curve.n >= lo) & (curve.n <= hi)
    if int(usable.sum()) < 3:
        raise InsufficientDataError(
            f"need >= 3 positive mse points in the window, got {int(usable.sum())}"
        )
    slope = np.polyfit(curve.n[usable], np.log(curve.mse[usable]), 1)[0]
    return float(slope)
