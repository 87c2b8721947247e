"""Axis-aligned integer rectangles on a 1-indexed pixel grid."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Rect:
    """Closed pixel rectangle [row_lo, row_hi] x [col_lo, col_hi], 1-indexed."""

    row_lo: int
    row_hi: int
    col_lo: int
    col_hi: int

    def __post_init__(self) -> None:
        if self.row_lo < 1 or self.col_lo < 1:
            raise ValueError(f"rect indices are 1-based, got {self}")
        if self.row_hi < self.row_lo or self.col_hi < self.col_lo:
            raise ValueError(f"empty rect: {self}")

    @property
    def height(self) -> int:
        return self.row_hi - self.row_lo + 1

    @property
    def width(self) -> int:
        return self.col_hi - self.col_lo + 1

    @property
    def is_square(self) -> bool:
        return self.height == self.width

    def area(self) -> int:
        return self.height * self.width

    def contains(self, row: int, col: int) -> bool:
        return self.row_lo <= row <= self.row_hi and self.col_lo <= col <= self.col_hi

    def contains_rect(self, other: Rect) -> bool:
        return (
            self.row_lo <= other.row_lo
            and other.row_hi <= self.row_hi
            and self.col_lo <= other.col_lo
            and other.col_hi <= self.col_hi
        )
