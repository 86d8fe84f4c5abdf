"""Single-page memory state: allocation bitmap plus the block table."""

from __future__ import annotations

from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np


class PageError(Exception):
    """Base class for page-level failures."""


class InvalidPlacement(PageError):
    """Placement extends outside the page or has a non-positive size."""


class Overlap(PageError):
    """Placement targets at least one allocated cell."""


class UnknownBlock(PageError):
    pass


class FreeBlock(NamedTuple):
    start: int
    len: int


class PageState:
    """A page of ``page_size`` cells.

    ``bitmap[i]`` is 1 iff cell ``i`` belongs to some block in ``blocks``.
    ``blocks`` maps an allocation id to ``(start, len)`` and keeps insertion
    order, which is also id order when ids are issued monotonically.
    """

    __slots__ = ("page_size", "bitmap", "blocks", "_free_cache")

    def __init__(self, page_size: int):
        if int(page_size) < 1:
            raise ValueError(f"page_size must be >= 1, got {page_size}")
        self.page_size = int(page_size)
        self.bitmap = np.zeros(self.page_size, dtype=np.int8)
        self.blocks: Dict[object, Tuple[int, int]] = {}
        self._free_cache: Optional[List[FreeBlock]] = None

    @classmethod
    def from_bitmap(cls, bits) -> "PageState":
        """Build a page from a 0/1 sequence; each allocated run becomes one block.

        Block ids are the run ordinals 0, 1, ... in address order.
        """
        if isinstance(bits, str):
            bits = [int(c) for c in bits]
        arr = np.asarray(bits, dtype=np.int8)
        page = cls(arr.size)
        for i, (start, length) in enumerate(_runs(arr, value=1)):
            page.allocate(start, length, i)
        return page

    def copy(self) -> "PageState":
        other = PageState.__new__(PageState)
        other.page_size = self.page_size
        other.bitmap = self.bitmap.copy()
        other.blocks = dict(self.blocks)
        other._free_cache = self._free_cache
        return other

    # -- mutation -----------------------------------------------------------

    def allocate(self, start: int, size: int, block_id) -> None:
        """Mark ``[start, start + size)`` allocated under ``block_id``.

        Raises and leaves the page untouched on any failure.
        """
        start, size = int(start), int(size)
        if block_id in self.blocks:
            raise ValueError(f"allocation id {block_id!r} already live")
        if size < 1 or start < 0 or start + size > self.page_size:
            raise InvalidPlacement(
                f"placement start={start} size={size} outside page of {self.page_size}"
            )
        if self.bitmap[start:start + size].any():
            raise Overlap(f"placement start={start} size={size} overlaps allocated cells")
        self.bitmap[start:start + size] = 1
        self.blocks[block_id] = (start, size)
        self._free_cache = None

    def free(self, block_id) -> Tuple[int, int]:
        try:
            start, size = self.blocks.pop(block_id)
        except KeyError:
            raise UnknownBlock(f"no live block with id {block_id!r}") from None
        self.bitmap[start:start + size] = 0
        self._free_cache = None
        return start, size

    # -- queries ------------------------------------------------------------

    def free_blocks(self) -> List[FreeBlock]:
        """Maximal free runs in ascending start order."""
        if self._free_cache is None:
            self._free_cache = [FreeBlock(s, n) for s, n in _runs(self.bitmap, value=0)]
        return list(self._free_cache)

    def largest_free(self) -> int:
        blocks = self.free_blocks()
        return max((b.len for b in blocks), default=0)

    def can_satisfy(self, size: int) -> bool:
        return self.largest_free() >= size

    @property
    def allocated_cells(self) -> int:
        return int(self.bitmap.sum())

    def dump(self) -> str:
        """Text form used by ``inspect``: bit string, then ``id:start+len`` entries."""
        bits = "".join("1" if c else "0" for c in self.bitmap)
        table = " ".join(f"{bid}:{s}+{n}" for bid, (s, n) in self.blocks.items())
        return f"{bits}\n{table}" if table else f"{bits}\n"

    def __repr__(self) -> str:
        bits = "".join("1" if c else "0" for c in self.bitmap)
        return f"PageState({bits!r}, blocks={self.blocks!r})"


def new_page(page_size: int) -> PageState:
    return PageState(page_size)


def _runs(bits: np.ndarray, value: int) -> List[Tuple[int, int]]:
    mask = (bits == value).astype(np.int8)
    edges = np.diff(np.concatenate(([0], mask, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [(int(s), int(e - s)) for s, e in zip(starts, ends)]


def check_page(page: PageState) -> None:
    """Raise AssertionError if the bitmap and block table disagree."""
    cover = np.zeros(page.page_size, dtype=np.int64)
    for bid, (start, size) in page.blocks.items():
        assert size >= 1, f"block {bid!r} has size {size}"
        assert 0 <= start and start + size <= page.page_size, f"block {bid!r} out of bounds"
        cover[start:start + size] += 1
    assert cover.max(initial=0) <= 1, "blocks overlap"
    assert np.array_equal(cover, page.bitmap.astype(np.int64)), "bitmap disagrees with block table"
