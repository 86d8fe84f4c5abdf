"""First/best/worst/next-fit placement.

Every function returns the start cell of the chosen free block, or None when
no free block is large enough. Placement is always at a block's start.
"""

from __future__ import annotations

from typing import Optional

from .page import PageState

FIT_KINDS = ("first", "best", "worst", "next")
# High-level action index -> fit kind.
HIGH_LEVEL_KINDS = ("first", "best", "worst")


def first_fit(page: PageState, size: int) -> Optional[int]:
    for block in page.free_blocks():
        if block.len >= size:
            return block.start
    return None


def best_fit(page: PageState, size: int) -> Optional[int]:
    chosen = None
    for block in page.free_blocks():
        # strict < keeps the lowest start on ties
        if block.len >= size and (chosen is None or block.len < chosen.len):
            chosen = block
    return None if chosen is None else chosen.start


def worst_fit(page: PageState, size: int) -> Optional[int]:
    chosen = None
    for block in page.free_blocks():
        if chosen is None or block.len > chosen.len:
            chosen = block
    if chosen is None or chosen.len < size:
        return None
    return chosen.start


class FitPolicy:
    """A fit heuristic; ``rover`` is only used (and advanced) by next-fit."""

    def __init__(self, kind: str, rover: int = 0):
        if kind not in FIT_KINDS:
            raise ValueError(f"unknown fit kind {kind!r}; expected one of {FIT_KINDS}")
        self.kind = kind
        self.rover = rover

    def place(self, page: PageState, size: int) -> Optional[int]:
        if self.kind == "first":
            return first_fit(page, size)
        if self.kind == "best":
            return best_fit(page, size)
        if self.kind == "worst":
            return worst_fit(page, size)
        return next_fit(self, page, size)

    def __repr__(self) -> str:
        if self.kind == "next":
            return f"FitPolicy('next', rover={self.rover})"
        return f"FitPolicy({self.kind!r})"


def next_fit(policy: FitPolicy, page: PageState, size: int) -> Optional[int]:
    """First fitting block whose start is at or past the rover, wrapping once.

    On success the rover moves to the end of the placement (mod page_size).
    """
    fitting = [b for b in page.free_blocks() if b.len >= size]
    if not fitting:
        return None
    ahead = [b for b in fitting if b.start >= policy.rover]
    start = (ahead[0] if ahead else fitting[0]).start
    policy.rover = (start + size) % page.page_size
    return start


def place(kind: str, page: PageState, size: int) -> Optional[int]:
    """Stateless dispatch for first/best/worst."""
    if kind == "first":
        return first_fit(page, size)
    if kind == "best":
        return best_fit(page, size)
    if kind == "worst":
        return worst_fit(page, size)
    raise ValueError(f"stateless placement not defined for fit kind {kind!r}")
