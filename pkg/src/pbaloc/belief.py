"""Discrete posterior over object-center bins along one image axis.

The belief assigns probability mass to bins 1..N (pixel indices along one
axis).  A noisy binary answer to "does the center lie in bins [lo, hi]?"
reweights the mass: bins inside the answered interval are multiplied by
twice the response likelihood, bins outside by twice its complement.  The
stored vector is renormalized for numerical hygiene, but the scale the raw
doubled-likelihood weights would have accumulated is kept in ``log_total``,
and the bisection rule splits where the cumulative mass crosses 1/2 *in
that running scale*.

The running scale matters.  A fixed median split cannot recover from mass
piling onto a single wrong bin with the target on its low side: the
crossing bin always joins the low query interval, every subsequent answer
covers target and mode together, and their ratio freezes permanently.  The
raw-scale threshold drifts whenever a split is lopsided, sliding the query
point into the dominant bin's mass and restoring discrimination; with it,
repeated answers concentrate the mass at the true bin even when individual
answers are unreliable.

Bins are 1-indexed in every public signature.  ``Belief`` values are
immutable; all operations return new instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Error probabilities are kept away from 0 and 1/2: a zero would erase bins
# irrecoverably on a single wrong answer, and 1/2 carries no information.
EPS_MIN = 1e-3

# Slack when comparing cumulative sums against exactly 1/2 (a uniform prior
# over an even bin count hits 0.5 only in real arithmetic).
_HALF_TOL = 1e-12

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class Belief:
    """Probability mass over bins 1..n_bins.  Immutable once constructed.

    ``log_total`` is the log of the total mass the un-renormalized
    doubled-likelihood weights would have after the updates that produced
    this belief (0 for a fresh prior).  Only the bisection rule consumes it.
    """

    mass: np.ndarray
    log_total: float = 0.0

    def __post_init__(self) -> None:
        arr = np.array(self.mass, dtype=np.float64, copy=True)
        if arr.ndim != 1:
            raise ValueError(f"mass must be 1-D, got shape {arr.shape}")
        if arr.size < 2:
            raise ValueError(f"need at least 2 bins, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("mass contains NaN or infinite entries")
        if np.any(arr < 0.0):
            raise ValueError("mass contains negative entries")
        total = float(arr.sum())
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"mass sums to {total!r}, not 1 within {_MASS_TOL}")
        if not math.isfinite(self.log_total):
            raise ValueError(f"log_total must be finite, got {self.log_total!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "mass", arr)

    @property
    def n_bins(self) -> int:
        return int(self.mass.size)


@dataclass(frozen=True)
class BeliefSummary:
    """Location and spread statistics of a Belief, all in bin units."""

    median_bin: int
    map_bin: int
    variance: float
    credible_width_95: int


def uniform(n_bins: int) -> Belief:
    """Uninformed prior: equal mass 1/n_bins on every bin."""
    if n_bins < 2:
        raise ValueError(f"need at least 2 bins, got {n_bins}")
    return Belief(np.full(n_bins, 1.0 / n_bins))


def median_bin(b: Belief) -> int:
    """Smallest bin whose cumulative mass reaches 1/2."""
    cum = np.cumsum(b.mass)
    return int(np.searchsorted(cum, 0.5 - _HALF_TOL, side="left")) + 1


def bisection_point(b: Belief) -> int:
    """Bin X where the cumulative un-renormalized mass first exceeds 1/2.

    In the running scale of the raw doubled-likelihood weights, X satisfies
    sum(w[1..X-1]) <= 1/2 < sum(w[1..X]); for a fresh belief (log_total 0)
    this is the plain cumulative rule on the stored mass.  The result is
    clamped to [1, n_bins - 1] so that both halves [1, X] and [X+1, N] of a
    split at X are nonempty.
    """
    cum = np.cumsum(b.mass)
    # 0.5 in the raw scale = 0.5 * exp(-log_total) of the normalized mass.
    # Saturates gracefully: a huge scale puts the threshold at the first
    # occupied bin, a tiny one past the last (then the clamp applies).
    if b.log_total < -709.0:
        threshold = math.inf
    else:
        threshold = 0.5 * math.exp(-b.log_total)
    x = int(np.searchsorted(cum, threshold + _HALF_TOL, side="right")) + 1
    return min(max(x, 1), b.n_bins - 1)


def update(b: Belief, region: tuple[int, int], y: int, epsilon: float) -> Belief:
    """Reweight the belief by a noisy answer about a bin interval.

    Parameters
    ----------
    b : Belief
        Prior mass.
    region : (lo, hi)
        Inclusive 1-indexed bin interval the answer refers to.
    y : {0, 1}
        Answer: 1 = "center is in the interval", 0 = it is not.
    epsilon : float
        Assumed answer error probability, in [EPS_MIN, 0.5 - EPS_MIN].

    Returns
    -------
    Belief
        Posterior: in-region bins scaled by 2*(1-epsilon) (y=1) or
        2*epsilon (y=0), out-of-region bins by the complement factor,
        then renormalized to total mass 1.
    """
    lo, hi = region
    if not (1 <= lo <= hi <= b.n_bins):
        raise ValueError(f"region {region!r} invalid for {b.n_bins} bins")
    if y not in (0, 1):
        raise ValueError(f"response must be 0 or 1, got {y!r}")
    if not (EPS_MIN <= epsilon <= 0.5 - EPS_MIN):
        raise ValueError(
            f"epsilon {epsilon!r} outside [{EPS_MIN}, {0.5 - EPS_MIN}]"
        )
    f_in = 1.0 - epsilon if y == 1 else epsilon
    factors = np.full(b.n_bins, 2.0 * (1.0 - f_in))
    factors[lo - 1 : hi] = 2.0 * f_in
    weighted = b.mass * factors
    total = float(weighted.sum())
    return Belief(weighted / total, log_total=b.log_total + math.log(total))


def summarize(b: Belief) -> BeliefSummary:
    """Median, MAP bin (lowest index on ties), variance, and the width of
    the shortest contiguous interval holding at least 95% of the mass."""
    bins = np.arange(1, b.n_bins + 1, dtype=np.float64)
    mean = float(np.dot(b.mass, bins))
    variance = float(np.dot(b.mass, (bins - mean) ** 2))
    return BeliefSummary(
        median_bin=median_bin(b),
        map_bin=int(np.argmax(b.mass)) + 1,
        variance=variance,
        credible_width_95=_shortest_interval_width(b.mass, 0.95),
    )


def _shortest_interval_width(mass: np.ndarray, coverage: float) -> int:
    """Width of the shortest contiguous window with mass >= coverage.

    Binary search over the width; window sums come from prefix sums.  The
    maximal window sum is non-decreasing in width, so the search is valid.
    """
    target = coverage - _HALF_TOL
    prefix = np.concatenate(([0.0], np.cumsum(mass)))
    lo, hi = 1, mass.size
    while lo < hi:
        mid = (lo + hi) // 2
        if float(np.max(prefix[mid:] - prefix[:-mid])) >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo
