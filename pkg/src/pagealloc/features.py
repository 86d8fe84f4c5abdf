"""Hand-crafted page features for the linear Q-learner."""

from __future__ import annotations

import numpy as np

from .page import PageState

FEATURE_NAMES = (
    "avg_free_start",
    "avg_free_len",
    "largest_free_len",
    "smallest_free_len",
    "avg_alloc_start",
    "avg_alloc_len",
    "total_alloc_len",
    "largest_alloc_len",
    "smallest_alloc_len",
)
N_FEATURES = len(FEATURE_NAMES)


def extract_features(page: PageState) -> np.ndarray:
    """Nine block statistics, each divided by ``page_size``.

    Free blocks are the maximal free runs, allocated blocks come from the
    block table; a block's "index" is its start cell. An empty category
    contributes zeros.
    """
    n = float(page.page_size)
    out = np.zeros(N_FEATURES)
    free = page.free_blocks()
    if free:
        starts = np.array([b.start for b in free], dtype=np.float64)
        lens = np.array([b.len for b in free], dtype=np.float64)
        out[0:4] = starts.mean(), lens.mean(), lens.max(), lens.min()
    if page.blocks:
        spans = np.array(list(page.blocks.values()), dtype=np.float64)
        starts, lens = spans[:, 0], spans[:, 1]
        out[4:9] = starts.mean(), lens.mean(), lens.sum(), lens.max(), lens.min()
    return out / n


def page_from_observation(obs, page_size: int) -> PageState:
    """Rebuild a page from an observation's bitmap.

    Observations do not carry the block table, so each allocated run is
    treated as one block.
    """
    return PageState.from_bitmap(np.asarray(obs[:page_size], dtype=np.int8))


def observation_features(obs, page_size: int) -> np.ndarray:
    """Features for a raw observation plus the request size scaled by page_size."""
    page = page_from_observation(obs, page_size)
    return np.append(extract_features(page), float(obs[page_size]) / page_size)
