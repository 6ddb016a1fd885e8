"""
Linear algebra used by the structural algorithms.

Residue-field computations go through sympy's ``DomainMatrix`` over ``GF(p)``.
Dense matrices over the local base rings are plain nested lists of
``AdicScalar``; elimination there always pivots on units.
"""
import logging
from typing import List, Optional, Sequence, Tuple

from sympy.polys.domains import GF
from sympy.polys.matrices import DomainMatrix

from .adic_core import AdicScalar, RingDescriptor

logger = logging.getLogger(__name__)

ScalarMatrix = List[List[AdicScalar]]


# -- residue field ------------------------------------------------------

def _domain_matrix(rows: Sequence[Sequence[int]], ncols: int, p: int) -> DomainMatrix:
    field = GF(p)
    return DomainMatrix([[field(int(v) % p) for v in row] for row in rows], (len(rows), ncols), field)


def _to_ints(values, p: int) -> List[int]:
    return [int(v) % p for v in values]


def rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    if not rows or not rows[0]:
        return 0
    return _domain_matrix(rows, len(rows[0]), p).rank()


def rref_mod_p(rows: Sequence[Sequence[int]], ncols: int, p: int) -> Tuple[List[List[int]], Tuple[int, ...]]:
    if not rows:
        return [], ()
    reduced, pivots = _domain_matrix(rows, ncols, p).rref()
    return [_to_ints(row, p) for row in reduced.to_list()], tuple(pivots)


def independent_rows_mod_p(rows: Sequence[Sequence[int]], p: int) -> List[int]:
    """Indices of the first maximal linearly independent subfamily, in order."""
    if not rows or not rows[0]:
        return []
    ncols = len(rows[0])
    transposed = [[rows[i][j] for i in range(len(rows))] for j in range(ncols)]
    _, pivots = rref_mod_p(transposed, len(rows), p)
    return list(pivots)


def solve_mod_p(rows: Sequence[Sequence[int]], rhs: Sequence[int], p: int) -> Optional[List[int]]:
    """One solution x of A x = b (free variables set to 0), or None."""
    ncols = len(rows[0]) if rows else 0
    if not rows:
        return [0] * ncols
    augmented = [list(row) + [rhs[i]] for i, row in enumerate(rows)]
    reduced, pivots = rref_mod_p(augmented, ncols + 1, p)
    if ncols in pivots:
        return None
    solution = [0] * ncols
    for r, col in enumerate(pivots):
        solution[col] = reduced[r][ncols]
    return solution


def nullspace_mod_p(rows: Sequence[Sequence[int]], ncols: int, p: int) -> List[List[int]]:
    """Basis of {x : A x = 0}."""
    if not rows:
        return [[1 if i == j else 0 for i in range(ncols)] for j in range(ncols)]
    reduced, pivots = rref_mod_p(rows, ncols, p)
    basis = []
    for free in range(ncols):
        if free in pivots:
            continue
        vector = [0] * ncols
        vector[free] = 1
        for r, col in enumerate(pivots):
            vector[col] = (-reduced[r][free]) % p
        basis.append(vector)
    return basis


def inverse_mod_p(rows: Sequence[Sequence[int]], p: int) -> Optional[List[List[int]]]:
    n = len(rows)
    if n == 0:
        return []
    augmented = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(rows)]
    reduced, pivots = rref_mod_p(augmented, 2 * n, p)
    if tuple(pivots[:n]) != tuple(range(n)):
        return None
    return [row[n:] for row in reduced]


def matmul_mod_p(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]], p: int) -> List[List[int]]:
    inner = len(b)
    ncols = len(b[0]) if b else 0
    return [[sum(a[i][k] * b[k][j] for k in range(inner)) % p for j in range(ncols)] for i in range(len(a))]


# -- dense matrices over the base ring ------------------------------------

def identity_matrix(ring: RingDescriptor, n: int) -> ScalarMatrix:
    return [[ring.one() if i == j else ring.zero() for j in range(n)] for i in range(n)]


def zero_matrix(ring: RingDescriptor, nrows: int, ncols: int) -> ScalarMatrix:
    return [[ring.zero() for _ in range(ncols)] for _ in range(nrows)]


def matmul(ring: RingDescriptor, a: ScalarMatrix, b: ScalarMatrix) -> ScalarMatrix:
    inner = len(b)
    ncols = len(b[0]) if b else 0
    out = zero_matrix(ring, len(a), ncols)
    for i in range(len(a)):
        for k in range(inner):
            if a[i][k].is_zero():
                continue
            for j in range(ncols):
                out[i][j] = out[i][j] + a[i][k] * b[k][j]
    return out


def residue_matrix(matrix: ScalarMatrix) -> List[List[int]]:
    return [[x.residue() for x in row] for row in matrix]


def inverse_over_local(ring: RingDescriptor, matrix: ScalarMatrix) -> Optional[ScalarMatrix]:
    """Gauss-Jordan with unit pivots; None exactly when the residue matrix is singular."""
    n = len(matrix)
    work = [list(row) + identity_row for row, identity_row in zip(matrix, identity_matrix(ring, n))]
    for col in range(n):
        pivot_row = next((r for r in range(col, n) if work[r][col].is_unit()), None)
        if pivot_row is None:
            return None
        work[col], work[pivot_row] = work[pivot_row], work[col]
        scale = work[col][col].invert()
        work[col] = [x * scale for x in work[col]]
        for r in range(n):
            if r == col or work[r][col].is_zero():
                continue
            factor = work[r][col]
            work[r] = [x - factor * y for x, y in zip(work[r], work[col])]
    return [row[n:] for row in work]


def right_inverse_over_local(ring: RingDescriptor, matrix: ScalarMatrix) -> Optional[Tuple[ScalarMatrix, List[int]]]:
    """G with matrix·G = 1 supported on a set of columns whose residue block is invertible.

    Returns (G, used_columns) or None when the residue matrix has deficient row rank,
    in which case no right inverse exists over the local ring.
    """
    nrows = len(matrix)
    if nrows == 0:
        return [], []
    ncols = len(matrix[0])
    columns = [[matrix[i][j].residue() for i in range(nrows)] for j in range(ncols)]
    chosen = independent_rows_mod_p(columns, ring.prime)
    if len(chosen) < nrows:
        return None
    chosen = chosen[:nrows]
    square = [[matrix[i][j] for j in chosen] for i in range(nrows)]
    inverse = inverse_over_local(ring, square)
    if inverse is None:
        return None
    result = zero_matrix(ring, ncols, nrows)
    for position, col in enumerate(chosen):
        result[col] = list(inverse[position])
    return result, chosen
