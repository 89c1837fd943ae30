"""
Regular lattices, distance-band neighbours and row-standardised weights.

Sites sit at sub-cell centres of an ``r x r`` unit lattice whose cells are
each split into ``r_star x r_star`` sub-cells, so the nearest-neighbour
spacing is ``1 / r_star`` and the spatial domain stays ``[0, r)^2``.
Sites are enumerated row-major (index 0 in code is site 1 in files).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

__all__ = [
    "SiteSet",
    "NeighborOrders",
    "WeightSet",
    "build_lattice",
    "build_neighbors",
    "row_standardize",
    "lattice_weights",
    "write_weights",
    "read_weights",
]

DIST_RTOL = 1e-9


@dataclass(frozen=True)
class SiteSet:
    coords: np.ndarray
    r: int
    r_star: int

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class NeighborOrders:
    thresholds: tuple
    adjacency: tuple  # q CSR 0/1 matrices

    @property
    def q(self) -> int:
        return len(self.adjacency)

    @property
    def n(self) -> int:
        return self.adjacency[0].shape[0]


@dataclass(frozen=True)
class WeightSet:
    """q row-standardised n x n weight matrices plus the h_n diagnostic.

    ``h_n`` is the largest neighbour count over all orders and sites; it is
    bounded under increasing-domain growth and diverges under infill.
    """

    weights: tuple
    h_n: float

    @property
    def q(self) -> int:
        return len(self.weights)

    @property
    def n(self) -> int:
        return self.weights[0].shape[0]

    def combine(self, theta) -> sp.csr_matrix:
        """Return ``sum_k theta_k W_k``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.q,):
            raise ValueError(f"theta must have length q={self.q}, got {theta.shape}")
        out = sp.csr_matrix((self.n, self.n))
        for t, w in zip(theta, self.weights):
            if t != 0.0:
                out = out + t * w
        return out.tocsr()

    def norms(self) -> list[tuple[float, float]]:
        """Per-order ``(||W||_1, ||W||_inf)``."""
        res = []
        for w in self.weights:
            a = abs(w)
            res.append((float(a.sum(axis=0).max()), float(a.sum(axis=1).max())))
        return res


def build_lattice(r: int, r_star: int) -> SiteSet:
    """Sites at the centres of an ``(r r_star) x (r r_star)`` grid over ``[0, r)^2``.

    >>> build_lattice(1, 1).coords
    array([[0.5, 0.5]])
    """
    r, r_star = int(r), int(r_star)
    if r < 1 or r_star < 1:
        raise ValueError("r and r_star must be positive integers")
    side = r * r_star
    a, b = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    coords = np.column_stack([(a.ravel() + 0.5) / r_star, (b.ravel() + 0.5) / r_star])
    return SiteSet(coords=coords, r=r, r_star=r_star)


def build_neighbors(sites: SiteSet, thresholds: Sequence[float]) -> NeighborOrders:
    """Order-k adjacency: ``d_ij`` in ``(delta_{k-1}, delta_k]``.

    Band edges are widened by a relative ``1e-9`` so that lattice distances
    landing exactly on a threshold are included in the lower band.

    Raises
    ------
    ValueError
        If the thresholds are not strictly increasing from 0, or if some
        order has no neighbour pairs at all.
    """
    delta = np.asarray(thresholds, dtype=float)
    if delta.ndim != 1 or delta.size < 2:
        raise ValueError("need at least two thresholds (delta_0 = 0, delta_1)")
    if delta[0] != 0.0:
        raise ValueError("delta_0 must be 0")
    if np.any(np.diff(delta) <= 0):
        raise ValueError("thresholds must be strictly increasing")

    n = sites.n
    tree = cKDTree(sites.coords)
    pairs = tree.query_pairs(delta[-1] * (1 + DIST_RTOL), output_type="ndarray")
    if pairs.size:
        d = np.linalg.norm(sites.coords[pairs[:, 0]] - sites.coords[pairs[:, 1]], axis=1)
    else:
        d = np.empty(0)

    adjacency = []
    for k in range(1, delta.size):
        lo, hi = delta[k - 1] * (1 + DIST_RTOL), delta[k] * (1 + DIST_RTOL)
        mask = (d > lo) & (d <= hi)
        i, j = pairs[mask, 0], pairs[mask, 1]
        if i.size == 0:
            raise ValueError(f"order {k} neighbourhood ({delta[k-1]}, {delta[k]}] is empty")
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        a = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        a.sort_indices()
        adjacency.append(a)
    return NeighborOrders(thresholds=tuple(float(x) for x in delta), adjacency=tuple(adjacency))


def row_standardize(adj: NeighborOrders) -> WeightSet:
    # zero-neighbour rows stay zero; the fitter screens for them
    weights = []
    h_n = 0.0
    for a in adj.adjacency:
        counts = np.asarray(a.sum(axis=1)).ravel()
        h_n = max(h_n, float(counts.max()))
        inv = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
        w = sp.diags(inv) @ a
        weights.append(sp.csr_matrix(w))
    return WeightSet(weights=tuple(weights), h_n=h_n)


def lattice_weights(r: int, r_star: int, thresholds: Sequence[float] = (0.0, 1.0)) -> WeightSet:
    """Shortcut: lattice -> neighbours -> row-standardised weights."""
    return row_standardize(build_neighbors(build_lattice(r, r_star), thresholds))


def write_weights(w: WeightSet, path) -> None:
    """Write the ``n q`` header then one ``k i j w`` line per nonzero (1-based)."""
    lines = [f"{w.n} {w.q}"]
    for k, mat in enumerate(w.weights, start=1):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{k} {i + 1} {j + 1} {v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_weights(path) -> WeightSet:
    """Inverse of :func:`write_weights`; ``h_n`` is recomputed from row counts."""
    text = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in text if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: first line must be 'n q'")
    n, q = int(rows[0][0]), int(rows[0][1])
    trip = {k: ([], [], []) for k in range(1, q + 1)}
    for lineno, parts in enumerate(rows[1:], start=2):
        if len(parts) != 4:
            raise ValueError(f"{path}: line {lineno}: expected 'k i j w'")
        k, i, j = int(parts[0]), int(parts[1]), int(parts[2])
        if k not in trip or not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"{path}: line {lineno}: index out of range")
        trip[k][0].append(i - 1)
        trip[k][1].append(j - 1)
        trip[k][2].append(float(parts[3]))
    weights = []
    h_n = 0.0
    for k in range(1, q + 1):
        r, c, v = trip[k]
        mat = sp.csr_matrix((v, (r, c)), shape=(n, n))
        mat.sort_indices()
        h_n = max(h_n, float(np.diff(mat.indptr).max()) if n else 0.0)
        weights.append(mat)
    return WeightSet(weights=tuple(weights), h_n=h_n)
