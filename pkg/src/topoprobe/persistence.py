"""Persistent homology over the two-element field.

Two reduction routes produce the same persistence pairs:

* :func:`build_boundary_matrix` + :func:`reduce` -- the textbook column
  reduction of the boundary matrix, with clearing.  Columns are sorted
  index lists and column addition is a symmetric difference.
* :func:`reduce_cohomology` -- H0 by union-find under the elder rule,
  higher dimensions by reducing coboundary columns in reverse filtration
  order, again with clearing.  The top simplices of a Rips filtration
  almost never need a column of their own here, which is what makes a
  few hundred landmarks tractable in pure Python.

:func:`persistence` picks the cohomology route by default.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ParameterError
from .filtration import RipsFiltration, format_value


@dataclass
class BoundaryMatrix:
    """Column ``j`` lists the filtration indices of the facets of simplex ``j``."""

    columns: List[List[int]]
    dims: np.ndarray

    def __len__(self) -> int:
        return len(self.columns)


@dataclass
class Reduction:
    """Output of a reduction: ``pairs`` maps birth index -> death index.

    ``essential`` lists unpaired simplices, including those in the top
    dimension of the filtration (which only exist to kill cycles one
    dimension down).
    """

    pairs: Dict[int, int]
    essential: List[int]
    columns: Optional[List[List[int]]] = None


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass
class PersistenceDiagram:
    """Persistence pairs in dimensions ``0..max_dim``.

    The arrays are parallel: ``death`` is ``inf`` for essential classes,
    and ``death_index`` is ``-1`` for them.  Zero-persistence pairs are
    kept; :meth:`pairs` drops them unless asked.  ``n_simplices`` and
    ``n_truncated`` (unpaired top-dimension simplices) make the simplex
    conservation check possible from the diagram alone.
    """

    dim: np.ndarray
    birth: np.ndarray
    death: np.ndarray
    birth_index: np.ndarray
    death_index: np.ndarray
    max_dim: int
    threshold: float
    n_simplices: int = 0
    n_truncated: int = 0

    def __len__(self) -> int:
        return self.dim.shape[0]

    @property
    def zero_persistence(self) -> np.ndarray:
        return self.death == self.birth

    @property
    def essential(self) -> np.ndarray:
        return np.isinf(self.death)

    def pairs(self, dim: Optional[int] = None, include_zero: bool = False) -> List[PersistencePair]:
        keep = np.ones(len(self), dtype=bool)
        if dim is not None:
            keep &= self.dim == dim
        if not include_zero:
            keep &= ~self.zero_persistence
        return [
            PersistencePair(int(k), float(b), float(d))
            for k, b, d in zip(self.dim[keep], self.birth[keep], self.death[keep])
        ]

    def intervals(self, dim: int, include_zero: bool = False) -> np.ndarray:
        """``(m, 2)`` array of (birth, death) for one dimension."""
        keep = self.dim == dim
        if not include_zero:
            keep &= ~self.zero_persistence
        return np.stack([self.birth[keep], self.death[keep]], axis=1)

    def conservation_holds(self) -> bool:
        """Every simplex is exactly one of: birth, death, essential, truncated."""
        finite = int(np.count_nonzero(~self.essential))
        return 2 * finite + int(np.count_nonzero(self.essential)) + self.n_truncated == self.n_simplices


@dataclass(frozen=True)
class BettiNumbers:
    scale: float
    betti: Tuple[int, ...]

    def __getitem__(self, k: int) -> int:
        return self.betti[k]


# ------------------------------------------------------------ homology route

def build_boundary_matrix(filt: RipsFiltration) -> BoundaryMatrix:
    """Explicit boundary matrix; raises if a facet is missing."""
    columns: List[List[int]] = [[] for _ in range(len(filt))]
    for k in range(1, filt.top_dim + 1):
        idx, facets = filt.faces(k)
        facets.sort(axis=1)
        for j, col in zip(idx.tolist(), facets.tolist()):
            columns[j] = col
    return BoundaryMatrix(columns, filt.dims.copy())


def _xor_sorted(a: List[int], b: List[int]) -> List[int]:
    return sorted(set(a).symmetric_difference(b))


def reduce(matrix: BoundaryMatrix) -> Reduction:
    """Standard column reduction with clearing.

    Dimensions are processed from the top down.  Once column ``j`` has
    lowest row ``i``, column ``i`` is known to reduce to zero and is
    cleared without being touched.
    """
    cols = [list(c) for c in matrix.columns]
    n = len(cols)
    cleared = np.zeros(n, dtype=bool)
    low_owner: Dict[int, int] = {}
    pairs: Dict[int, int] = {}
    dims = np.asarray(matrix.dims)
    top = int(dims.max()) if n else -1
    for k in range(top, 0, -1):
        for j in np.flatnonzero(dims == k).tolist():
            if cleared[j]:
                cols[j] = []
                continue
            col = cols[j]
            while col:
                owner = low_owner.get(col[-1])
                if owner is None:
                    break
                col = _xor_sorted(col, cols[owner])
            cols[j] = col
            if col:
                low_owner[col[-1]] = j
                pairs[col[-1]] = j
                cleared[col[-1]] = True
    deaths = set(pairs.values())
    essential = [i for i in range(n) if i not in pairs and i not in deaths]
    return Reduction(pairs=pairs, essential=essential, columns=cols)


# ---------------------------------------------------------- cohomology route

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root


def _zero_dim_pairs(filt: RipsFiltration) -> Tuple[Dict[int, int], List[int]]:
    """Elder-rule union-find over edges in filtration order.

    Returns (pairs vertex -> edge, edges that close a cycle).
    """
    order_of_vertex = filt.lookup(0, np.arange(filt.n_vertices))
    uf = _UnionFind(filt.n_vertices)
    # component root is always its oldest vertex
    eidx, everts = filt.vertex_array(1)
    pairs: Dict[int, int] = {}
    cycle_edges: List[int] = []
    birth = order_of_vertex.tolist()
    for e, (u, v) in zip(eidx.tolist(), everts.tolist()):
        ru, rv = uf.find(u), uf.find(v)
        if ru == rv:
            cycle_edges.append(e)
            continue
        if birth[ru] > birth[rv]:
            ru, rv = rv, ru
        pairs[birth[rv]] = e
        uf.parent[rv] = ru
    return pairs, cycle_edges


class _Cofacets:
    """Cofacet enumeration for the ``k``-simplices of a filtration.

    With the distance matrix at hand, the pivot of a coboundary column
    (its earliest cofacet) is found from diameters and keys alone; the
    full column is only built when the pivot collides with another.
    """

    def __init__(self, filt: RipsFiltration, k: int):
        self.filt = filt
        self.k = k
        self.n = filt.n_vertices
        self.index, self.rows = filt.vertex_array(k)
        self.all_vertices = np.arange(self.n, dtype=np.int64)
        self.powers = self.n ** np.arange(k + 1, -1, -1, dtype=np.int64)

    def keys_and_diameters(self, s: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        filt, k = self.filt, self.k
        verts = self.rows[np.searchsorted(self.index, s)]
        u = self.all_vertices
        diam = None
        if filt.distances is not None:
            diam = np.maximum(filt.distances[verts].max(axis=0), filt.diameters[s])
            ok = diam <= filt.threshold
            ok[verts] = False
            u, diam = u[ok], diam[ok]
        else:
            ok = np.ones(self.n, dtype=bool)
            ok[verts] = False
            u = u[ok]
        # key of sorted(verts + [u]) depends only on where u slots in
        hi = np.concatenate([[0], np.cumsum(verts * self.powers[: k + 1])])
        lo_all = verts * self.powers[1:]
        lo = np.concatenate([np.cumsum(lo_all[::-1])[::-1], [0]])
        base = hi + lo
        pos = np.searchsorted(verts, u)
        keys = base[pos] + u * self.powers[pos]
        return keys, diam

    def column(self, keys: np.ndarray) -> np.ndarray:
        found = self.filt.lookup(self.k + 1, keys)
        found = found[found >= 0]
        found.sort()
        return found

    def pivot(self, keys: np.ndarray, diam: Optional[np.ndarray]) -> int:
        if diam is None:
            col = self.column(keys)
            return int(col[0]) if col.shape[0] else -1
        if keys.shape[0] == 0:
            return -1
        first = keys[diam == diam.min()].min()
        return int(self.filt.lookup(self.k + 1, np.array([first]))[0])


def _xor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # both inputs are sorted; the stable sort merges the two runs in linear time
    c = np.concatenate([a, b])
    c.sort(kind="stable")
    if c.shape[0] < 2:
        return c
    dup = np.zeros(c.shape[0], dtype=bool)
    same = c[1:] == c[:-1]
    dup[1:] = same
    dup[:-1] |= same
    return c[~dup]


def reduce_cohomology(filt: RipsFiltration, max_dim: Optional[int] = None) -> Reduction:
    """Persistence pairs via union-find (H0) and coboundary reduction (H1 and up).

    Only dimensions ``0..max_dim`` are reduced; simplices of dimension
    ``max_dim + 1`` appear only as deaths or as unpaired (truncated) entries.
    """
    if max_dim is None:
        max_dim = filt.max_dim
    pairs: Dict[int, int] = {}
    essential: List[int] = []
    if len(filt) == 0:
        return Reduction(pairs, essential)

    zero_pairs, cycle_edges = _zero_dim_pairs(filt)
    pairs.update(zero_pairs)
    killed = set(zero_pairs.values())
    vidx, _ = filt.vertex_array(0)
    essential.extend(i for i in vidx.tolist() if i not in zero_pairs)

    candidates = cycle_edges
    for k in range(1, min(max_dim, filt.top_dim) + 1):
        cof = _Cofacets(filt, k)
        if k > 1:
            candidates = [i for i in cof.index.tolist() if i not in killed]
        # pivot -> owning simplex (column never modified) or its reduced column
        owner: Dict[int, object] = {}
        next_killed = set()
        for s in reversed(candidates):
            keys, diam = cof.keys_and_diameters(s)
            piv = cof.pivot(keys, diam)
            if piv < 0:
                essential.append(s)
                continue
            if piv not in owner:
                owner[piv] = s
                pairs[s] = piv
                next_killed.add(piv)
                continue
            col = cof.column(keys)
            while col.shape[0]:
                entry = owner.get(int(col[0]))
                if entry is None:
                    break
                if isinstance(entry, int):
                    entry = owner[int(col[0])] = cof.column(cof.keys_and_diameters(entry)[0])
                col = _xor(col, entry)
            if col.shape[0]:
                piv = int(col[0])
                owner[piv] = col
                pairs[s] = piv
                next_killed.add(piv)
            else:
                essential.append(s)
        killed = next_killed
    deaths = set(pairs.values())
    for k in range(max_dim + 1, filt.top_dim + 1):
        idx, _ = filt.vertex_array(k)
        essential.extend(i for i in idx.tolist() if i not in deaths)
    essential.sort()
    return Reduction(pairs=pairs, essential=essential)


# ------------------------------------------------------------------ diagrams

def extract_diagram(filt: RipsFiltration, pairing: Reduction, max_dim: Optional[int] = None) -> PersistenceDiagram:
    """Turn a pairing on ``filt`` into a diagram of dimensions ``0..max_dim``."""
    if max_dim is None:
        max_dim = filt.max_dim
    births = np.array(sorted(pairing.pairs), dtype=np.int64)
    deaths = np.array([pairing.pairs[b] for b in births.tolist()], dtype=np.int64)
    ess = np.asarray(pairing.essential, dtype=np.int64)
    ess_dims = filt.dims[ess].astype(np.int64) if ess.size else np.empty(0, np.int64)
    truncated = int(np.count_nonzero(ess_dims > max_dim))
    ess = ess[ess_dims <= max_dim] if ess.size else ess

    b_idx = np.concatenate([births, ess])
    d_idx = np.concatenate([deaths, np.full(ess.shape[0], -1, dtype=np.int64)])
    dims = filt.dims[b_idx].astype(np.int64) if b_idx.size else np.empty(0, np.int64)
    keep = dims <= max_dim
    b_idx, d_idx, dims = b_idx[keep], d_idx[keep], dims[keep]
    birth = filt.diameters[b_idx] if b_idx.size else np.empty(0)
    death = np.where(d_idx >= 0, filt.diameters[np.maximum(d_idx, 0)] if d_idx.size else 0.0, np.inf)
    order = np.lexsort((b_idx, dims))
    return PersistenceDiagram(
        dim=dims[order],
        birth=np.asarray(birth, dtype=np.float64)[order],
        death=np.asarray(death, dtype=np.float64)[order],
        birth_index=b_idx[order],
        death_index=d_idx[order],
        max_dim=max_dim,
        threshold=filt.threshold,
        n_simplices=len(filt),
        n_truncated=truncated,
    )


def persistence(filt: RipsFiltration, method: str = "cohomology") -> PersistenceDiagram:
    """Diagram of ``filt`` in dimensions ``0..filt.max_dim``."""
    if method == "cohomology":
        red = reduce_cohomology(filt)
    elif method == "homology":
        red = reduce(build_boundary_matrix(filt))
    else:
        raise ParameterError(f"unknown reduction method {method!r}")
    return extract_diagram(filt, red)


def betti_at(diagram: PersistenceDiagram, t: float) -> BettiNumbers:
    """Betti numbers at scale ``t``: pairs with ``birth <= t < death``."""
    if t < 0 or t > diagram.threshold:
        raise ParameterError(f"scale {t} lies outside [0, {diagram.threshold}]")
    alive = (diagram.birth <= t) & (t < diagram.death)
    counts = np.bincount(diagram.dim[alive], minlength=diagram.max_dim + 1)
    return BettiNumbers(float(t), tuple(int(c) for c in counts[: diagram.max_dim + 1]))


def dominant_features(diagram: PersistenceDiagram, dim: int, k: int) -> List[PersistencePair]:
    """Top ``k`` pairs of ``dim`` by persistence; infinite bars rank first, ties by birth."""
    if k < 1:
        raise ParameterError("k must be at least 1")
    pairs = diagram.pairs(dim, include_zero=True)
    pairs.sort(key=lambda p: (-p.persistence, p.birth))
    return pairs[:k]


def mid_scale(diagram: PersistenceDiagram, dim: int) -> float:
    """Midpoint of the longest bar in ``dim``, with infinite bars capped at the threshold."""
    iv = diagram.intervals(dim)
    if iv.shape[0] == 0:
        raise ParameterError(f"no bars in dimension {dim}")
    death = np.minimum(iv[:, 1], diagram.threshold)
    best = int(np.argmax(death - iv[:, 0]))
    return float((iv[best, 0] + death[best]) / 2)


# ----------------------------------------------------------------------- I/O

def diagram_to_csv(diagram: PersistenceDiagram, path=None, include_zero: bool = False) -> str:
    """CSV ``dim,birth,death``; infinite deaths are written as ``inf``."""
    buf = io.StringIO()
    buf.write("dim,birth,death\n")
    for p in diagram.pairs(include_zero=include_zero):
        buf.write(f"{p.dim},{format_value(p.birth)},{format_value(p.death)}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_diagram_csv(path) -> List[PersistencePair]:
    lines = Path(path).read_text().splitlines()
    out = []
    for line in lines[1:]:
        if line.strip():
            d, b, e = line.split(",")
            out.append(PersistencePair(int(d), float(b), float(e)))
    return out
