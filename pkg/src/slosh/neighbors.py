"""Uniform spatial hash grid for fixed-radius neighbour queries.

Pairs are always returned in canonical ``(i, j)`` lexicographic order so that
any downstream accumulation is deterministic and independent of the order in
which points are stored in the grid cells.
"""

from __future__ import annotations

import numpy as np


class SpatialHashGrid:
    """Bucket points into square cells of side ``cell_size``.

    Args:
        points: ``(n, 2)`` array of point coordinates.
        cell_size: cell edge length; queries with radius up to ``cell_size``
            only need to visit the 3x3 block around the query cell.
    """

    _OFFSETS = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=np.int64)

    def __init__(self, points, cell_size):
        if cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.cell_size = float(cell_size)
        cells = np.floor(self.points / self.cell_size).astype(np.int64)
        self._keys = self._hash(cells)
        # stable sort keeps ascending point index inside each cell
        self._order = np.argsort(self._keys, kind="stable")
        self._sorted_keys = self._keys[self._order]

    @staticmethod
    def _hash(cells):
        # 2^21 per axis is far beyond any tank/grid ratio used here
        return (cells[..., 0] + (1 << 20)) * (1 << 21) + (cells[..., 1] + (1 << 20))

    def query_pairs(self, queries, radius, exclude_self=False):
        """All ``(i, j)`` with ``|queries[i] - points[j]| < radius``.

        ``exclude_self`` drops ``i == j`` (use when querying a grid built on
        the same point set).  Returns two ``int64`` arrays sorted by ``(i, j)``.
        """
        if radius > self.cell_size * (1.0 + 1e-12):
            raise ValueError("query radius exceeds the grid cell size")
        queries = np.asarray(queries, dtype=float).reshape(-1, 2)
        n_q = len(queries)
        if n_q == 0 or len(self.points) == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        qcells = np.floor(queries / self.cell_size).astype(np.int64)
        # (n_q, 9) neighbouring cell keys
        nkeys = self._hash(qcells[:, None, :] + self._OFFSETS[None, :, :])
        lo = np.searchsorted(self._sorted_keys, nkeys, side="left").ravel()
        hi = np.searchsorted(self._sorted_keys, nkeys, side="right").ravel()
        counts = hi - lo
        qi = np.repeat(np.repeat(np.arange(n_q), 9), counts)
        starts = np.repeat(lo, counts)
        within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        pj = self._order[starts + within]
        d = queries[qi] - self.points[pj]
        keep = (d[:, 0] ** 2 + d[:, 1] ** 2) < radius * radius
        if exclude_self:
            keep &= qi != pj
        qi, pj = qi[keep], pj[keep]
        order = np.lexsort((pj, qi))
        return qi[order], pj[order]


def brute_force_pairs(queries, points, radius, exclude_self=False):
    """Reference O(n m) neighbour search with the same output contract."""
    queries = np.asarray(queries, dtype=float).reshape(-1, 2)
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    d = queries[:, None, :] - points[None, :, :]
    mask = (d[..., 0] ** 2 + d[..., 1] ** 2) < radius * radius
    if exclude_self:
        n = min(len(queries), len(points))
        mask[np.arange(n), np.arange(n)] = False
    i, j = np.nonzero(mask)
    return i.astype(np.int64), j.astype(np.int64)
