"""Nearest access-node lookup.

The Monte Carlo engine associates up to ~10^4 user positions per trial, so
the hot path is a numba-compiled uniform-grid search (O(1) per query for
roughly uniform points). A pure-numpy brute-force version is kept both as
an import fallback and as the oracle the grid search is tested against.

Both paths break exact distance ties toward the lowest node index.
"""

from __future__ import annotations

import numpy as np

try:
    import numba as _nb

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on broken installs
    _HAVE_NUMBA = False


def nearest_brute(nodes: np.ndarray, queries: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Exact nearest-node index per query via chunked distance matrices."""
    out = np.empty(len(queries), dtype=np.int64)
    nx = nodes[:, 0]
    ny = nodes[:, 1]
    for i in range(0, len(queries), chunk):
        q = queries[i : i + chunk]
        d2 = (q[:, 0, None] - nx) ** 2 + (q[:, 1, None] - ny) ** 2
        # np.argmin returns the first (lowest-index) minimiser
        out[i : i + chunk] = np.argmin(d2, axis=1)
    return out


if _HAVE_NUMBA:

    @_nb.njit(cache=True)
    def _grid_query(nodes, queries, x0, y0, side):
        n_nodes = nodes.shape[0]
        n_q = queries.shape[0]
        m = int(np.sqrt(n_nodes))
        if m < 1:
            m = 1
        cell = side / m

        # bucket nodes by grid cell, preserving index order within a cell
        counts = np.zeros(m * m, dtype=np.int64)
        cx = np.empty(n_nodes, dtype=np.int64)
        cy = np.empty(n_nodes, dtype=np.int64)
        for i in range(n_nodes):
            x = int((nodes[i, 0] - x0) / cell)
            y = int((nodes[i, 1] - y0) / cell)
            if x < 0:
                x = 0
            elif x >= m:
                x = m - 1
            if y < 0:
                y = 0
            elif y >= m:
                y = m - 1
            cx[i] = x
            cy[i] = y
            counts[x * m + y] += 1
        starts = np.zeros(m * m + 1, dtype=np.int64)
        for c in range(m * m):
            starts[c + 1] = starts[c] + counts[c]
        order = np.empty(n_nodes, dtype=np.int64)
        fill = starts[: m * m].copy()
        for i in range(n_nodes):
            c = cx[i] * m + cy[i]
            order[fill[c]] = i
            fill[c] += 1

        out = np.empty(n_q, dtype=np.int64)
        for j in range(n_q):
            qx = queries[j, 0]
            qy = queries[j, 1]
            gx = int((qx - x0) / cell)
            gy = int((qy - y0) / cell)
            if gx < 0:
                gx = 0
            elif gx >= m:
                gx = m - 1
            if gy < 0:
                gy = 0
            elif gy >= m:
                gy = m - 1
            best = -1
            best_d2 = np.inf
            ring = 0
            while True:
                xa = gx - ring
                xb = gx + ring
                ya = gy - ring
                yb = gy + ring
                lox = xa if xa > 0 else 0
                hix = xb if xb < m - 1 else m - 1
                loy = ya if ya > 0 else 0
                hiy = yb if yb < m - 1 else m - 1
                for x in range(lox, hix + 1):
                    for y in range(loy, hiy + 1):
                        if ring > 0 and x != xa and x != xb and y != ya and y != yb:
                            continue  # interior of the ring was already scanned
                        c = x * m + y
                        for k in range(starts[c], starts[c + 1]):
                            i = order[k]
                            dx = nodes[i, 0] - qx
                            dy = nodes[i, 1] - qy
                            d2 = dx * dx + dy * dy
                            if d2 < best_d2 or (d2 == best_d2 and i < best):
                                best_d2 = d2
                                best = i
                # any unscanned node sits in ring >= ring+1, hence at
                # distance >= ring*cell from a query inside its own cell;
                # strict < so exact ties are still swept for a lower index
                if best >= 0:
                    bound = ring * cell
                    if best_d2 < bound * bound:
                        break
                ring += 1
                if ring > 2 * m:  # grid exhausted (query far outside)
                    break
            out[j] = best
        return out

    def nearest_index(nodes: np.ndarray, queries: np.ndarray) -> np.ndarray:
        """Index of the nearest node for each query point.

        Requires at least one node; lowest index wins exact ties.
        """
        nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        if len(nodes) == 0:
            raise ValueError("nearest_index requires at least one node")
        if len(queries) == 0:
            return np.empty(0, dtype=np.int64)
        if len(nodes) <= 8:
            return nearest_brute(nodes, queries)
        xmin = min(nodes[:, 0].min(), queries[:, 0].min())
        xmax = max(nodes[:, 0].max(), queries[:, 0].max())
        ymin = min(nodes[:, 1].min(), queries[:, 1].min())
        ymax = max(nodes[:, 1].max(), queries[:, 1].max())
        side = max(xmax - xmin, ymax - ymin)
        if side <= 0.0:  # all points coincide
            return np.zeros(len(queries), dtype=np.int64)
        return _grid_query(nodes, queries, xmin, ymin, side)

else:  # pragma: no cover

    def nearest_index(nodes: np.ndarray, queries: np.ndarray) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.float64)
        queries = np.asarray(queries, dtype=np.float64)
        if len(nodes) == 0:
            raise ValueError("nearest_index requires at least one node")
        if len(queries) == 0:
            return np.empty(0, dtype=np.int64)
        return nearest_brute(nodes, queries)
