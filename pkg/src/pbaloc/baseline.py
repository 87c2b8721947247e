"""Sliding-window localization baseline with exact call accounting.

Classifies every window on a regular grid of positions (and, across specs,
sizes) and returns the center of the highest-scoring window.  Exists to put
a classifier-call price tag on exhaustive scanning for speedup comparisons;
no non-maximum suppression, no box regression.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .engine import Block
from .geometry import Rect
from .oracles import OracleResponse
from .scene import Scene


@dataclass(frozen=True)
class WindowGridSpec:
    """Square windows of side window_side stepped by shift pixels."""

    window_side: int
    shift: int

    def __post_init__(self) -> None:
        if not (1 <= self.shift <= self.window_side):
            raise ValueError(
                f"need 1 <= shift <= window_side, got shift={self.shift}, "
                f"window_side={self.window_side}"
            )


class BlockOracle(Protocol):
    """Anything that can classify one square block of a scene."""

    @property
    def calls(self) -> int: ...

    def classify_block(self, block: Block) -> OracleResponse: ...


def window_grid(width: int, height: int, spec: WindowGridSpec) -> list[Rect]:
    """All fully-inside windows at offsets 0, shift, 2*shift, ... per axis.

    Count is (floor((width - w) / s) + 1) * (floor((height - w) / s) + 1).
    Row-major scan order: row offsets outer, column offsets inner.
    """
    w, s = spec.window_side, spec.shift
    if w > min(width, height):
        raise ValueError(f"window_side {w} exceeds min image dimension "
                         f"of {width}x{height}")
    rects = []
    for row_off in range(0, height - w + 1, s):
        for col_off in range(0, width - w + 1, s):
            rects.append(Rect(row_off + 1, row_off + w, col_off + 1, col_off + w))
    return rects


def sliding_window_localize(
    scene: Scene,
    oracle: BlockOracle,
    specs: Sequence[WindowGridSpec],
) -> tuple[tuple[int, int], int]:
    """Classify every window of every spec; return (center, total calls).

    The center is the midpoint of the window with the highest object
    confidence; ties go to the first window in scan order.
    """
    best_rect: Rect | None = None
    best_p = -1.0
    calls = 0
    for spec in specs:
        for i, rect in enumerate(window_grid(scene.width, scene.height, spec)):
            response = oracle.classify_block(Block(rect=rect, index=i + 1))
            calls += 1
            p_obj = response.confidence[0]
            if p_obj > best_p:
                best_p = p_obj
                best_rect = rect
    assert best_rect is not None
    center = (
        (best_rect.row_lo + best_rect.row_hi) // 2,
        (best_rect.col_lo + best_rect.col_hi) // 2,
    )
    return center, calls


def speedup(pba_calls: int, sw_calls: int) -> float:
    """Classifier-call ratio of the exhaustive baseline over the search."""
    if pba_calls < 1:
        raise ValueError(f"pba_calls must be >= 1, got {pba_calls}")
    return sw_calls / pba_calls
