"""Alternating-axis bisection search over an image with a noisy oracle.

Each iteration works on one axis: bisect that axis's posterior at its
median-crossing bin, pick one side of the split uniformly at random, cover
the chosen half-image with square blocks, classify every block, fuse the
per-block answers into a single binary response with an error-probability
estimate, and reweight the axis posterior.  Axes strictly alternate, so both
dimensions receive the same number of queries over a run.

Fusion rule: a response is positive iff any block favors the object class;
its error probability is the smallest implied block error (1 - max
confidence) on the winning side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Protocol, Sequence

import numpy as np

from . import belief as belief_mod
from .belief import EPS_MIN, Belief
from .geometry import Rect
from .oracles import OracleResponse

Axis = Literal["rows", "cols"]
Side = Literal["low", "high"]

BeliefPair = tuple[Belief, Belief]  # (rows, cols)


@dataclass(frozen=True)
class QueryRegion:
    """One half of the image produced by splitting an axis at split_bin.

    side="low" covers bins [1, split_bin] of the axis, side="high" covers
    [split_bin + 1, N]; the rect spans the full extent of the other axis.
    """

    axis: Axis
    split_bin: int
    side: Side
    rect: Rect

    def interval(self) -> tuple[int, int]:
        """Inclusive bin interval of the queried axis."""
        if self.axis == "rows":
            return (self.rect.row_lo, self.rect.row_hi)
        return (self.rect.col_lo, self.rect.col_hi)


@dataclass(frozen=True)
class Block:
    """Square tile of a query region, 1-based index within the partition."""

    rect: Rect
    index: int

    def __post_init__(self) -> None:
        if not self.rect.is_square:
            raise ValueError(f"block rect must be square, got {self.rect}")
        if self.index < 1:
            raise ValueError(f"block index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class FusedResponse:
    """Combined answer for one query region.

    y = 1 iff any block favored the object class; epsilon is the fused
    error-probability estimate, clamped into [EPS_MIN, 0.5 - EPS_MIN].
    """

    y: int
    epsilon: float
    per_block: tuple[OracleResponse, ...]
    positive_set: frozenset[int]


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = 200
    stop_map_mass: float = 0.99
    stop_credible_width: int = 3
    rng_seed: int = 0
    block_input_side: int = 100

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not (0.5 < self.stop_map_mass < 1.0):
            raise ValueError(f"stop_map_mass must be in (0.5, 1), got {self.stop_map_mass}")
        if self.stop_credible_width < 1:
            raise ValueError(
                f"stop_credible_width must be >= 1, got {self.stop_credible_width}"
            )
        if self.block_input_side < 1:
            raise ValueError(
                f"block_input_side must be >= 1, got {self.block_input_side}"
            )


@dataclass(frozen=True)
class TraceRow:
    """Per-iteration record; mirrors the trace CSV schema."""

    t: int
    axis: Axis
    split_bin: int
    side: Side
    q_blocks: int
    y: int
    epsilon: float
    calls_cum: int
    median_row: int
    median_col: int
    map_row: int
    map_col: int
    var_row: float
    var_col: float
    width95_row: int
    width95_col: int


@dataclass(frozen=True)
class LocalizationResult:
    center: tuple[int, int]
    iterations_used: int
    oracle_calls: int
    converged: bool
    trace: tuple[TraceRow, ...]


class RegionOracle(Protocol):
    """Anything that can answer a query region given its block partition."""

    @property
    def calls(self) -> int: ...

    def respond(
        self, region: QueryRegion, blocks: Sequence[Block]
    ) -> Sequence[OracleResponse]: ...


def make_query(
    b: Belief,
    axis: Axis,
    image_dims: tuple[int, int],
    rng: np.random.Generator,
) -> QueryRegion:
    """Split the axis posterior at its bisection point and draw a side.

    The low and high sides are chosen with probability 1/2 each from the
    rng stream; the rect spans the other axis entirely.
    """
    n_rows, n_cols = image_dims
    extent = n_rows if axis == "rows" else n_cols
    if b.n_bins != extent:
        raise ValueError(f"belief has {b.n_bins} bins but {axis} extent is {extent}")
    split = belief_mod.bisection_point(b)
    side: Side = "low" if rng.random() < 0.5 else "high"
    lo, hi = (1, split) if side == "low" else (split + 1, b.n_bins)
    if axis == "rows":
        rect = Rect(lo, hi, 1, n_cols)
    else:
        rect = Rect(1, n_rows, lo, hi)
    return QueryRegion(axis=axis, split_bin=split, side=side, rect=rect)


def partition_blocks(region: QueryRegion) -> list[Block]:
    """Tile the region with squares sized to its minimum dimension.

    Blocks of side m (the min dimension) are laid along the long dimension
    of length L at offsets 0, m, 2m, ...; the final block is shifted back to
    end exactly at the region boundary, overlapping its predecessor when m
    does not divide L.  The union of blocks covers the region exactly, with
    ceil(L / m) blocks in total.
    """
    rect = region.rect
    height, width = rect.height, rect.width
    m = min(height, width)
    long_len = max(height, width)
    count = math.ceil(long_len / m)
    blocks: list[Block] = []
    for i in range(count):
        offset = min(i * m, long_len - m)
        if height >= width:
            block_rect = Rect(rect.row_lo + offset, rect.row_lo + offset + m - 1,
                              rect.col_lo, rect.col_hi)
        else:
            block_rect = Rect(rect.row_lo, rect.row_hi,
                              rect.col_lo + offset, rect.col_lo + offset + m - 1)
        blocks.append(Block(rect=block_rect, index=i + 1))
    return blocks


def fuse_responses(
    per_block: Sequence[OracleResponse | tuple],
) -> FusedResponse:
    """Combine per-block answers into one binary response and error estimate.

    Labels are recomputed from the confidence pairs (argmax), never taken
    from the wire.  If any block favors the object class the fused answer is
    positive and epsilon is the smallest implied error among those blocks;
    otherwise the answer is negative and epsilon is the smallest implied
    error overall.  Epsilon is clamped into [EPS_MIN, 0.5 - EPS_MIN].
    """
    if len(per_block) == 0:
        raise ValueError("per_block must be nonempty")
    responses: list[OracleResponse] = []
    for item in per_block:
        if isinstance(item, OracleResponse):
            responses.append(item)
            continue
        try:
            _label, conf = item
            p_obj, p_bg = (float(v) for v in conf)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"malformed per-block entry: {item!r}") from exc
        responses.append(OracleResponse(1 if p_obj >= p_bg else 0, (p_obj, p_bg)))
    positive = frozenset(
        i + 1 for i, r in enumerate(responses) if r.confidence[0] > r.confidence[1]
    )
    if positive:
        y = 1
        epsilon = min(responses[i - 1].error_estimate for i in positive)
    else:
        y = 0
        epsilon = min(r.error_estimate for r in responses)
    epsilon = min(max(epsilon, EPS_MIN), 0.5 - EPS_MIN)
    return FusedResponse(y=y, epsilon=epsilon, per_block=tuple(responses),
                         positive_set=positive)


def step(
    beliefs: BeliefPair,
    axis: Axis,
    oracle: RegionOracle,
    scene_dims: tuple[int, int],
    rng: np.random.Generator,
    config: EngineConfig | None = None,
    *,
    t: int = 1,
    calls_base: int = 0,
) -> tuple[BeliefPair, TraceRow]:
    """Run one query on one axis: bisect, partition, classify, fuse, update.

    Only the queried axis's belief changes.  ``calls_base`` is subtracted
    from the oracle's counter so the trace reports calls cumulative within
    the current run.
    """
    b_rows, b_cols = beliefs
    b = b_rows if axis == "rows" else b_cols
    region = make_query(b, axis, scene_dims, rng)
    blocks = partition_blocks(region)
    fused = fuse_responses(list(oracle.respond(region, blocks)))
    updated = belief_mod.update(b, region.interval(), fused.y, fused.epsilon)
    new_beliefs: BeliefPair = (
        (updated, b_cols) if axis == "rows" else (b_rows, updated)
    )
    sum_rows = belief_mod.summarize(new_beliefs[0])
    sum_cols = belief_mod.summarize(new_beliefs[1])
    row = TraceRow(
        t=t,
        axis=axis,
        split_bin=region.split_bin,
        side=region.side,
        q_blocks=len(fused.per_block),
        y=fused.y,
        epsilon=fused.epsilon,
        calls_cum=oracle.calls - calls_base,
        median_row=sum_rows.median_bin,
        median_col=sum_cols.median_bin,
        map_row=sum_rows.map_bin,
        map_col=sum_cols.map_bin,
        var_row=sum_rows.variance,
        var_col=sum_cols.variance,
        width95_row=sum_rows.credible_width_95,
        width95_col=sum_cols.credible_width_95,
    )
    return new_beliefs, row


def _axis_converged(b: Belief, width95: int, config: EngineConfig) -> bool:
    return (
        float(np.max(b.mass)) >= config.stop_map_mass
        or width95 <= config.stop_credible_width
    )


def run(
    scene_dims: tuple[int, int],
    oracle: RegionOracle,
    config: EngineConfig,
) -> LocalizationResult:
    """Localize the target center by alternating row and column queries.

    Stops once BOTH axes satisfy the convergence test (a single bin holding
    at least stop_map_mass, or a 95% credible interval no wider than
    stop_credible_width bins), or at max_iterations with converged=False.
    The center estimate is the per-axis posterior median.
    """
    n_rows, n_cols = scene_dims
    rng = np.random.default_rng(config.rng_seed)
    beliefs: BeliefPair = (belief_mod.uniform(n_rows), belief_mod.uniform(n_cols))
    calls_base = oracle.calls
    trace: list[TraceRow] = []
    converged = False
    t = 0
    for t in range(1, config.max_iterations + 1):
        axis: Axis = "rows" if t % 2 == 1 else "cols"
        beliefs, row = step(
            beliefs, axis, oracle, scene_dims, rng, config, t=t, calls_base=calls_base
        )
        trace.append(row)
        if _axis_converged(beliefs[0], row.width95_row, config) and _axis_converged(
            beliefs[1], row.width95_col, config
        ):
            converged = True
            break
    last = trace[-1]
    return LocalizationResult(
        center=(last.median_row, last.median_col),
        iterations_used=t,
        oracle_calls=oracle.calls - calls_base,
        converged=converged,
        trace=tuple(trace),
    )
