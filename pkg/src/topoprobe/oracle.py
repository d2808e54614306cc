"""Brute-force Betti numbers for validating the persistence engine.

Works from the simplex list alone: builds each boundary operator of the
sub-complex at a scale as rows of Python-int bitmasks and takes ranks by
Gaussian elimination over the two-element field.  Nothing here is shared
with :mod:`topoprobe.persistence`.
"""

from __future__ import annotations

from collections import defaultdict
from itertools import combinations
from typing import Dict, List, Optional, Tuple

from .errors import CapacityError
from .filtration import RipsFiltration

ORACLE_CAP = 500


def gf2_rank(rows: List[int]) -> int:
    """Rank of a 0/1 matrix given as integer bitmask rows."""
    basis: Dict[int, int] = {}
    rank = 0
    for row in rows:
        while row:
            top = row.bit_length() - 1
            if top not in basis:
                basis[top] = row
                rank += 1
                break
            row ^= basis[top]
    return rank


def oracle_betti(
    filt: RipsFiltration, t: float, max_dim: Optional[int] = None, cap: int = ORACLE_CAP
) -> Tuple[int, ...]:
    """Betti numbers ``b_0..b_max_dim`` of the sub-complex with diameter <= ``t``.

    ``b_k = dim ker d_k - rank d_{k+1}``.  Raises :class:`CapacityError`
    when the sub-complex has more than ``cap`` simplices.
    """
    if max_dim is None:
        max_dim = filt.max_dim
    by_dim: Dict[int, List[Tuple[int, ...]]] = defaultdict(list)
    size = 0
    for s in filt.iter_simplices():
        if s.diameter <= t:
            size += 1
            if size > cap:
                raise CapacityError(f"sub-complex exceeds the oracle cap of {cap} simplices", cap)
            by_dim[s.dim].append(s.vertices)

    position = {k: {v: i for i, v in enumerate(sorted(simps))} for k, simps in by_dim.items()}

    def boundary_rank(k: int) -> int:
        if k == 0 or not by_dim.get(k):
            return 0
        faces = position[k - 1]
        rows = []
        for simplex in by_dim[k]:
            mask = 0
            for face in combinations(simplex, k):
                mask |= 1 << faces[face]
            rows.append(mask)
        return gf2_rank(rows)

    ranks = [boundary_rank(k) for k in range(max_dim + 2)]
    return tuple(len(by_dim.get(k, ())) - ranks[k] - ranks[k + 1] for k in range(max_dim + 1))
