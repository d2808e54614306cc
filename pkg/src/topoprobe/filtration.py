"""Distance matrices, Vietoris-Rips filtrations and maxmin landmarks.

A :class:`RipsFiltration` stores its simplices as parallel flat arrays
rather than Python objects: dimension, diameter and an integer key that
encodes the sorted vertex tuple in base ``n``.  For a fixed dimension the
key order is the lexicographic vertex order, which is the tie-break used
when sorting, and it doubles as a lookup key for faces and cofaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import CapacityError, CorruptFiltrationError, ParameterError
from .geometry import as_cloud, rng

DEFAULT_MAX_SIMPLICES = 25_000_000


@dataclass(frozen=True)
class Simplex:
    vertices: Tuple[int, ...]
    diameter: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


def build_distance_matrix(cloud) -> np.ndarray:
    """Pairwise Euclidean distances, exactly symmetric with a zero diagonal."""
    cloud = as_cloud(cloud)
    n = cloud.shape[0]
    if n < 2:
        return np.zeros((n, n))
    return squareform(pdist(cloud))


def enclosing_radius(dm: np.ndarray) -> float:
    """``min_i max_j d(i, j)``; above this scale the Rips complex is a cone."""
    dm = np.asarray(dm, dtype=np.float64)
    if dm.shape[0] == 0:
        return 0.0
    return float(dm.max(axis=1).min())


def _check_distance_matrix(dm) -> np.ndarray:
    dm = np.asarray(dm, dtype=np.float64)
    if dm.ndim != 2 or dm.shape[0] != dm.shape[1]:
        raise ParameterError(f"distance matrix must be square, got {dm.shape}")
    if dm.size and (np.abs(dm - dm.T).max() > 1e-12 or np.any(np.diag(dm) != 0)):
        raise ParameterError("distance matrix must be symmetric with zero diagonal")
    if np.any(dm < 0) or not np.all(np.isfinite(dm)):
        raise ParameterError("distances must be finite and non-negative")
    return dm


def encode(vertices: np.ndarray, n: int) -> np.ndarray:
    """Base-``n`` keys for rows of sorted vertex indices."""
    vertices = np.asarray(vertices, dtype=np.int64)
    key = np.zeros(vertices.shape[0], dtype=np.int64)
    for col in range(vertices.shape[1]):
        key = key * n + vertices[:, col]
    return key


def decode(keys: np.ndarray, dim: int, n: int) -> np.ndarray:
    """Inverse of :func:`encode` for simplices of dimension ``dim``."""
    keys = np.asarray(keys, dtype=np.int64).copy()
    out = np.empty((keys.shape[0], dim + 1), dtype=np.int64)
    for col in range(dim, -1, -1):
        keys, out[:, col] = np.divmod(keys, n)
    return out


@dataclass
class RipsFiltration:
    """Simplices in filtration order: by diameter, then dimension, then vertices."""

    n_vertices: int
    max_dim: int
    threshold: float
    dims: np.ndarray
    diameters: np.ndarray
    keys: np.ndarray
    distances: Optional[np.ndarray] = field(default=None, repr=False)
    _lookup: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self._lookup is None:
            self._lookup = {}
            for k in range(int(self.dims.max()) + 1 if len(self.dims) else 0):
                idx = np.flatnonzero(self.dims == k)
                order = np.argsort(self.keys[idx], kind="stable")
                self._lookup[k] = (self.keys[idx][order], idx[order])

    def __len__(self) -> int:
        return self.dims.shape[0]

    @property
    def top_dim(self) -> int:
        """Highest simplex dimension present (``-1`` when empty)."""
        return max(self._lookup) if self._lookup else -1

    def count(self, dim: int) -> int:
        return self._lookup[dim][0].shape[0] if dim in self._lookup else 0

    def vertices(self, index: int) -> Tuple[int, ...]:
        row = decode(self.keys[index : index + 1], int(self.dims[index]), max(self.n_vertices, 1))
        return tuple(int(v) for v in row[0])

    def vertex_array(self, dim: int) -> Tuple[np.ndarray, np.ndarray]:
        """(global indices in filtration order, vertex rows) for one dimension."""
        idx = np.flatnonzero(self.dims == dim)
        return idx, decode(self.keys[idx], dim, max(self.n_vertices, 1))

    def index_of(self, vertices: Sequence[int]) -> int:
        vs = np.asarray(sorted(vertices), dtype=np.int64)[None, :]
        found = self.lookup(len(vertices) - 1, encode(vs, self.n_vertices))[0]
        if found < 0:
            raise KeyError(tuple(vertices))
        return int(found)

    def lookup(self, dim: int, keys: np.ndarray) -> np.ndarray:
        """Global indices for ``keys`` of dimension ``dim``; ``-1`` where absent."""
        keys = np.asarray(keys, dtype=np.int64)
        if dim not in self._lookup:
            return np.full(keys.shape, -1, dtype=np.int64)
        sorted_keys, positions = self._lookup[dim]
        pos = np.searchsorted(sorted_keys, keys)
        pos_c = np.minimum(pos, sorted_keys.shape[0] - 1)
        hit = (pos < sorted_keys.shape[0]) & (sorted_keys[pos_c] == keys)
        return np.where(hit, positions[pos_c], -1)

    def faces(self, dim: int) -> Tuple[np.ndarray, np.ndarray]:
        """For every ``dim``-simplex: (its global index, global indices of its facets).

        Raises :class:`CorruptFiltrationError` if any facet is missing.
        """
        idx, verts = self.vertex_array(dim)
        if dim == 0:
            return idx, np.empty((idx.shape[0], 0), dtype=np.int64)
        cols = []
        for drop in range(dim, -1, -1):
            facet = np.delete(verts, drop, axis=1)
            cols.append(self.lookup(dim - 1, encode(facet, self.n_vertices)))
        facets = np.stack(cols, axis=1) if cols else np.empty((idx.shape[0], 0), dtype=np.int64)
        if np.any(facets < 0):
            bad = int(idx[np.any(facets < 0, axis=1)][0])
            raise CorruptFiltrationError(f"simplex {self.vertices(bad)} is missing a facet")
        return idx, facets

    @property
    def simplices(self) -> List[Simplex]:
        return list(self.iter_simplices())

    def iter_simplices(self) -> Iterator[Simplex]:
        n = max(self.n_vertices, 1)
        for i in range(len(self)):
            verts = decode(self.keys[i : i + 1], int(self.dims[i]), n)[0]
            yield Simplex(tuple(int(v) for v in verts), float(self.diameters[i]))

    def subcomplex_size(self, t: float) -> int:
        """Number of simplices with diameter at most ``t``."""
        return int(np.count_nonzero(self.diameters <= t))

    def validate(self) -> None:
        """Check sort order and face closure; raises on violation."""
        if np.any(np.diff(self.diameters) < 0):
            raise CorruptFiltrationError("filtration values are not sorted")
        for k in range(1, self.top_dim + 1):
            idx, facets = self.faces(k)
            if facets.size and np.any(facets >= idx[:, None]):
                raise CorruptFiltrationError(f"a {k}-simplex precedes one of its faces")
            if facets.size and np.any(self.diameters[facets] > self.diameters[idx][:, None]):
                raise CorruptFiltrationError(f"a {k}-simplex is younger than a face")


def _cofaces(prefix_vertices, prefix_diam, dm, adj):
    """Extend each prefix by two higher-indexed common neighbours."""
    n = dm.shape[0]
    arange = np.arange(n)
    out_v, out_d = [], []
    for p, pd in zip(prefix_vertices, prefix_diam):
        common = adj[p[0]].copy()
        for v in p[1:]:
            common &= adj[v]
        common &= arange > p[-1]
        cand = np.flatnonzero(common)
        if cand.shape[0] < 2:
            continue
        a, b = np.nonzero(np.triu(adj[np.ix_(cand, cand)], 1))
        if a.shape[0] == 0:
            continue
        reach = dm[np.ix_(p, cand)].max(axis=0)
        diam = np.maximum(np.maximum(reach[a], reach[b]), dm[cand[a], cand[b]])
        diam = np.maximum(diam, pd)
        rows = np.empty((a.shape[0], len(p) + 2), dtype=np.int64)
        rows[:, : len(p)] = p
        rows[:, -2] = cand[a]
        rows[:, -1] = cand[b]
        out_v.append(rows)
        out_d.append(diam)
    if not out_v:
        return np.empty((0, prefix_vertices.shape[1] + 2), np.int64), np.empty(0)
    return np.concatenate(out_v), np.concatenate(out_d)


def rips_filtration(
    dm,
    max_dim: int = 1,
    threshold: Optional[float] = None,
    max_simplices: int = DEFAULT_MAX_SIMPLICES,
) -> RipsFiltration:
    """Vietoris-Rips filtration with simplices up to dimension ``max_dim + 1``.

    Parameters
    ----------
    dm : (n, n) array
        Distance matrix.
    max_dim : int
        Highest homology dimension of interest.  Simplices one dimension
        higher are included so that ``max_dim`` cycles can die.
    threshold : float, optional
        Largest diameter kept.  Defaults to the enclosing radius.
    max_simplices : int
        Raise :class:`CapacityError` rather than exceed this many simplices.
    """
    dm = _check_distance_matrix(dm)
    if max_dim < 0:
        raise ParameterError("max_dim must be non-negative")
    if threshold is None:
        threshold = enclosing_radius(dm)
    elif not threshold > 0:
        raise ParameterError("threshold must be positive")
    n = dm.shape[0]
    top = max_dim + 1

    if n > max_simplices:
        raise CapacityError(f"{n} vertices exceed the cap of {max_simplices} simplices", max_simplices)
    per_dim_v = [np.arange(n, dtype=np.int64)[:, None]]
    per_dim_d = [np.zeros(n)]
    total = n
    adj = dm <= threshold
    np.fill_diagonal(adj, False)

    if top >= 1 and n >= 2:
        i, j = np.triu_indices(n, 1)
        keep = dm[i, j] <= threshold
        per_dim_v.append(np.stack([i[keep], j[keep]], axis=1).astype(np.int64))
        per_dim_d.append(dm[i[keep], j[keep]])
        total += per_dim_v[-1].shape[0]
        if total > max_simplices:
            raise CapacityError(f"filtration exceeds the cap of {max_simplices} simplices", max_simplices)

    for k in range(2, top + 1):
        if len(per_dim_v) < k or per_dim_v[k - 2].shape[0] == 0:
            break
        verts, diam = _cofaces(per_dim_v[k - 2], per_dim_d[k - 2], dm, adj)
        if verts.shape[0] == 0:
            break
        total += verts.shape[0]
        if total > max_simplices:
            raise CapacityError(f"filtration exceeds the cap of {max_simplices} simplices", max_simplices)
        per_dim_v.append(verts)
        per_dim_d.append(diam)

    base = max(n, 1)
    dims = np.concatenate([np.full(v.shape[0], k, dtype=np.int8) for k, v in enumerate(per_dim_v)])
    diameters = np.concatenate(per_dim_d)
    keys = np.concatenate([encode(v, base) for v in per_dim_v])
    order = np.lexsort((keys, dims, diameters))
    return RipsFiltration(
        n_vertices=n,
        max_dim=max_dim,
        threshold=float(threshold),
        dims=dims[order],
        diameters=diameters[order],
        keys=keys[order],
        distances=dm,
    )


def landmark_subsample(
    cloud, k: int, seed: int = 0, start: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Greedy maxmin (farthest-point) landmarks.

    The first landmark is ``start`` when given, otherwise drawn from
    ``seed``.  Each later landmark maximises its distance to the chosen
    set; ties go to the lowest index.  Returns (landmark points, indices).
    """
    cloud = as_cloud(cloud)
    n = cloud.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    first = int(rng(seed).integers(n)) if start is None else int(start)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = first
    mind = np.linalg.norm(cloud - cloud[first], axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(mind))
        chosen[i] = nxt
        np.minimum(mind, np.linalg.norm(cloud - cloud[nxt], axis=1), out=mind)
    return cloud[chosen], chosen


def covering_radius(cloud, landmarks) -> float:
    """Largest distance from a cloud point to its nearest landmark."""
    cloud = as_cloud(cloud)
    landmarks = as_cloud(landmarks, cloud.shape[1])
    best = np.full(cloud.shape[0], np.inf)
    for p in landmarks:
        np.minimum(best, np.linalg.norm(cloud - p, axis=1), out=best)
    return float(best.max()) if best.size else 0.0


def format_value(x: float) -> str:
    return "inf" if np.isinf(x) else "%.17g" % x


def export_filtration(filt: RipsFiltration, path=None) -> str:
    """One line per simplex: ``dim; v0,v1,...; diameter``."""
    lines = [
        f"{s.dim}; {','.join(str(v) for v in s.vertices)}; {format_value(s.diameter)}"
        for s in filt.iter_simplices()
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_filtration_text(text: str) -> List[Simplex]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        dim, verts, diam = (part.strip() for part in line.split(";"))
        vs = tuple(int(v) for v in verts.split(","))
        if len(vs) != int(dim) + 1:
            raise CorruptFiltrationError(f"bad simplex line {line!r}")
        out.append(Simplex(vs, float(diam)))
    return out


def complete_complex_size(n: int, max_dim: int) -> int:
    """Simplex count of the full complex on ``n`` vertices up to dimension ``max_dim + 1``."""
    from math import comb

    return sum(comb(n, k + 1) for k in range(max_dim + 2))
