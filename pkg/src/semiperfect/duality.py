"""
Matrix calculus of the duality between free contramodules and products.

Both Hom(r[[Y]], r[[X]]) and Hom_cont(r^X, r^Y) are the row-zero-convergent
Y x X matrices.  A ``DualityMatrix`` records which of the two it currently
stands for; ``dual_matrix`` only flips that reading.  On the contramodule
side row vectors are multiplied on the left (s -> sA), on the product side
column vectors are multiplied on the right (v -> Av), so composition order
reverses between the two.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

from .adic_core import AdicScalar, RingDescriptor
from .endo_topology import EndoElement
from .errors import InputError, NotRowConvergent, NotSummable
from .matrices import PatternMatrix
from .module_decomp import DecomposedModule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeometricTail:
    """Coefficients initial·ratio^(k - start) for every k >= start."""
    start: int
    initial: AdicScalar
    ratio: AdicScalar


@dataclass(frozen=True)
class FormalFamily:
    """An X-indexed family of base values: X = {0..size-1}, or omega when size is None.

    Positions below ``len(head)`` are listed explicitly; an omega-indexed
    family may continue with a geometric tail from ``tail.start``, and is zero
    between the head and the tail.
    """
    ring: RingDescriptor
    head: Tuple[AdicScalar, ...] = ()
    tail: Optional[GeometricTail] = None
    size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(self.head))
        if any(x.ring != self.ring for x in self.head):
            raise InputError("Family coefficients must lie in the family's ring")
        if self.size is not None:
            if self.tail is not None:
                raise InputError("Finite families have no tail")
            if len(self.head) > self.size:
                raise InputError(f"{len(self.head)} coefficients for an index set of size {self.size}")
        if self.tail is not None:
            if self.tail.start < len(self.head):
                raise InputError("A geometric tail must start after the listed coefficients")
            if self.tail.initial.ring != self.ring or self.tail.ratio.ring != self.ring:
                raise InputError("Tail values must lie in the family's ring")
            if self.tail.initial.is_zero():
                object.__setattr__(self, "tail", None)

    @classmethod
    def finite(cls, ring: RingDescriptor, values: Sequence[Union[AdicScalar, int, str]],
               size: Optional[int] = None) -> "FormalFamily":
        head = tuple(ring.scalar(v) for v in values)
        return cls(ring, head, None, len(head) if size is None else size)

    @classmethod
    def point_mass(cls, ring: RingDescriptor, index: int, size: Optional[int] = None) -> "FormalFamily":
        head = tuple(ring.one() if k == index else ring.zero() for k in range(index + 1))
        return cls(ring, head, None, size)

    @classmethod
    def geometric(cls, ring: RingDescriptor, initial: Union[AdicScalar, int, str],
                  ratio: Union[AdicScalar, int, str], start: int = 0,
                  head: Sequence[Union[AdicScalar, int, str]] = ()) -> "FormalFamily":
        values = tuple(ring.scalar(v) for v in head)
        return cls(ring, values, GeometricTail(start, ring.scalar(initial), ring.scalar(ratio)), None)

    @property
    def is_omega(self) -> bool:
        return self.size is None

    @property
    def support_end(self) -> Optional[int]:
        """One past the last nonzero coefficient; None for an infinite tail."""
        if self.tail is not None:
            if self.tail.ratio.is_zero():
                return self.tail.start + 1
            return None
        last = [k for k, x in enumerate(self.head) if not x.is_zero()]
        return last[-1] + 1 if last else 0

    def coefficient(self, k: int) -> AdicScalar:
        if k < 0 or (self.size is not None and k >= self.size):
            raise InputError(f"Index {k} outside the index set")
        if k < len(self.head):
            return self.head[k]
        if self.tail is not None and k >= self.tail.start:
            return self.tail.initial * self.tail.ratio ** (k - self.tail.start)
        return self.ring.zero()

    def is_zero_convergent(self) -> bool:
        """Valuations of the coefficients tend to infinity."""
        if self.tail is None:
            return True
        return self.tail.ratio.valuation() >= 1

    def __str__(self) -> str:
        parts = [str(x) for x in self.head]
        if self.tail is not None:
            parts.append(f"from {self.tail.start}: ({self.tail.initial})*({self.tail.ratio})^k")
        return "[" + ", ".join(parts) + ("" if self.size is not None else ", ...") + "]"


ValueFamily = Union[FormalFamily, Tuple[FormalFamily, ...]]


def _pair_sum(coeffs: FormalFamily, values: FormalFamily) -> AdicScalar:
    ring = coeffs.ring
    if values.ring != ring:
        raise InputError("Coefficients and values live in different rings")
    if coeffs.size != values.size and not (coeffs.size is None or values.size is None):
        raise InputError("Coefficients and values are indexed by different sets")
    ends = [f.support_end for f in (coeffs, values)]
    if any(end is not None for end in ends):
        bound = min(end for end in ends if end is not None)
        return _finite_sum(coeffs, values, bound)
    split = max(coeffs.tail.start, values.tail.start)
    total = _finite_sum(coeffs, values, split)
    ratio = coeffs.tail.ratio * values.tail.ratio
    if ratio.valuation() < 1:
        raise NotSummable(f"Tail ratio {ratio} is not topologically nilpotent")
    first = coeffs.coefficient(split) * values.coefficient(split)
    return total + first * (ring.one() - ratio).invert()


def _finite_sum(coeffs: FormalFamily, values: FormalFamily, bound: int) -> AdicScalar:
    total = coeffs.ring.zero()
    for k in range(bound):
        a = coeffs.coefficient(k)
        if not a.is_zero():
            total = total + a * values.coefficient(k)
    return total


def eval_contraaction(coeffs: FormalFamily, values: ValueFamily) -> Union[AdicScalar, Tuple[AdicScalar, ...]]:
    """Σ_x coeffs[x]·values[x] as the limit of finite partial sums.

    ``values`` is a family of base values, or a tuple of such families (one
    per coordinate of a free target of finite rank).
    """
    if not coeffs.is_zero_convergent():
        raise NotRowConvergent("Coefficient family is not zero-convergent")
    if isinstance(values, tuple):
        return tuple(_pair_sum(coeffs, component) for component in values)
    return _pair_sum(coeffs, values)


def flatten(outer: FormalFamily, inner: Sequence[FormalFamily]) -> FormalFamily:
    """Monad multiplication on finite supports: Σ_y outer[y]·inner[y]."""
    end = outer.support_end
    if end is None:
        raise NotSummable("Flattening needs an outer family of finite support")
    if len(inner) < end:
        raise InputError(f"Need {end} inner families, got {len(inner)}")
    used = [inner[y] for y in range(end) if not outer.coefficient(y).is_zero()]
    if any(f.support_end is None for f in used):
        raise NotSummable("Flattening needs inner families of finite support")
    sizes = {f.size for f in inner}
    if len(sizes) > 1:
        raise InputError("Inner families are indexed by different sets")
    size = sizes.pop() if sizes else None
    width = max((f.support_end for f in used), default=0)
    ring = outer.ring
    head = []
    for x in range(width):
        total = ring.zero()
        for y in range(end):
            a = outer.coefficient(y)
            if not a.is_zero():
                total = total + a * inner[y].coefficient(x)
        head.append(total)
    return FormalFamily(ring, tuple(head), None, size)


# -- matrices -------------------------------------------------------------------

class MatrixSide(Enum):
    CONTRA = "contra"
    PRODUCT = "product"


class Direction(Enum):
    CONTRA_TO_PROD = "contra_to_prod"
    PROD_TO_CONTRA = "prod_to_contra"


@dataclass(frozen=True)
class DualityMatrix:
    """A Y x X matrix of one of three kinds.

    ``rows`` holds finitely many rows of ``FormalFamily`` over the base ring
    and ``pattern`` an omega x omega ``PatternMatrix``.  ``elements`` is a
    finite grid of elements of r = End(M)^op: a morphism between free
    r-contramodules r[[Y]] -> r[[X]] of finite rank, or between the products
    r^X -> r^Y.
    """
    ring: RingDescriptor
    side: MatrixSide
    rows: Optional[Tuple[FormalFamily, ...]] = None
    pattern: Optional[PatternMatrix] = None
    elements: Optional[Tuple[Tuple[EndoElement, ...], ...]] = None

    def __post_init__(self):
        if sum(body is not None for body in (self.rows, self.pattern, self.elements)) != 1:
            raise InputError("A duality matrix has exactly one of rows, a pattern body or an element grid")
        if self.rows is not None:
            object.__setattr__(self, "rows", tuple(self.rows))
            if len({row.size for row in self.rows}) > 1:
                raise InputError("All rows must be indexed by the same set X")
            if any(row.ring != self.ring for row in self.rows):
                raise InputError("Rows must lie over the matrix ring")
        elif self.pattern is not None:
            if self.pattern.ring != self.ring:
                raise InputError("Pattern body lies over another ring")
        else:
            grid = tuple(tuple(row) for row in self.elements)
            object.__setattr__(self, "elements", grid)
            if not grid or not grid[0] or any(len(row) != len(grid[0]) for row in grid):
                raise InputError("An element grid must be a nonempty rectangle")
            module = grid[0][0].module
            if module.ring != self.ring or any(x.module != module for row in grid for x in row):
                raise InputError("Grid entries must lie in one endomorphism ring over the matrix ring")

    @classmethod
    def from_rows(cls, ring: RingDescriptor, rows: Sequence[Sequence[Union[AdicScalar, int, str]]],
                  side: MatrixSide = MatrixSide.CONTRA) -> "DualityMatrix":
        width = len(rows[0]) if rows else 0
        if any(len(row) != width for row in rows):
            raise InputError("Rows of a finite matrix must have equal length")
        return cls(ring, side, tuple(FormalFamily.finite(ring, row, width) for row in rows))

    @classmethod
    def from_pattern(cls, pattern: PatternMatrix, side: MatrixSide = MatrixSide.CONTRA) -> "DualityMatrix":
        return cls(pattern.ring, side, None, pattern)

    @classmethod
    def identity(cls, ring: RingDescriptor, size: Optional[int], side: MatrixSide = MatrixSide.CONTRA) -> "DualityMatrix":
        if size is None:
            return cls.from_pattern(PatternMatrix.identity(ring), side)
        return cls.from_rows(ring, [[1 if i == j else 0 for i in range(size)] for j in range(size)], side)

    @classmethod
    def from_elements(cls, grid: Sequence[Sequence[EndoElement]],
                      side: MatrixSide = MatrixSide.CONTRA) -> "DualityMatrix":
        if not grid or not grid[0]:
            raise InputError("An element grid must be a nonempty rectangle")
        return cls(grid[0][0].ring, side, elements=tuple(tuple(row) for row in grid))

    @classmethod
    def projector(cls, e: EndoElement, side: MatrixSide = MatrixSide.CONTRA) -> "DualityMatrix":
        """The 1 x 1 matrix (e) on the free module of rank one.

        On the contramodule side it maps s -> s·e with image r·e; on the
        product side v -> e·v with image e·r.
        """
        if e @ e != e:
            raise InputError("Projector matrices come from idempotents")
        return cls.from_elements(((e,),), side)

    @property
    def is_pattern(self) -> bool:
        return self.pattern is not None

    @property
    def is_element_grid(self) -> bool:
        return self.elements is not None

    @property
    def module(self) -> Optional[DecomposedModule]:
        """M for a grid over End(M)^op, otherwise None."""
        return self.elements[0][0].module if self.is_element_grid else None

    @property
    def shape(self) -> Tuple[Optional[int], Optional[int]]:
        if self.is_pattern:
            return None, None
        if self.is_element_grid:
            return len(self.elements), len(self.elements[0])
        width = self.rows[0].size if self.rows else 0
        return len(self.rows), width

    def entry(self, y: int, x: int) -> Union[AdicScalar, EndoElement]:
        if self.is_pattern:
            return self.pattern.entry(y, x)
        if self.is_element_grid:
            return self.elements[y][x]
        return self.rows[y].coefficient(x)

    def row(self, y: int) -> FormalFamily:
        if self.is_element_grid:
            raise InputError("Rows of a matrix over End(M)^op are not base-ring families")
        if self.is_pattern:
            entries = self.pattern.row(y)
            width = entries[-1][0] + 1 if entries else 0
            head = [self.ring.zero()] * width
            for x, value in entries:
                head[x] = value
            return FormalFamily(self.ring, tuple(head))
        return self.rows[y]

    def to_lists(self) -> List[List[Union[AdicScalar, EndoElement]]]:
        if self.is_pattern:
            raise InputError("Pattern matrices have no dense form")
        if self.is_element_grid:
            return [list(row) for row in self.elements]
        _, width = self.shape
        if width is None:
            raise InputError("Rows over omega have no dense form")
        return [[row.coefficient(x) for x in range(width)] for row in self.rows]

    def __str__(self) -> str:
        if self.is_pattern:
            body = str(self.pattern)
        elif self.is_element_grid:
            body = "[" + ", ".join("[" + ", ".join(str(x) for x in row) + "]" for row in self.elements) + "]"
        else:
            body = "[" + ", ".join(str(r) for r in self.rows) + "]"
        return f"{self.side.value}:{body}"


def check_row_zero_convergent(matrix: DualityMatrix, max_workers: int = 4) -> bool:
    """Every row is a zero-convergent family; pattern rows and element grids are finite."""
    if matrix.is_pattern or matrix.is_element_grid:
        return True
    if len(matrix.rows) <= 1:
        return all(row.is_zero_convergent() for row in matrix.rows)
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return all(executor.map(lambda row: row.is_zero_convergent(), matrix.rows))


def dual_matrix(morphism: DualityMatrix, direction: Direction) -> DualityMatrix:
    """The same matrix read on the other side of the duality."""
    expected = MatrixSide.CONTRA if direction is Direction.CONTRA_TO_PROD else MatrixSide.PRODUCT
    if morphism.side is not expected:
        raise InputError(f"{direction.value} expects a {expected.value}-side matrix, got {morphism.side.value}")
    if not check_row_zero_convergent(morphism):
        raise NotRowConvergent("Some row is not zero-convergent")
    other = MatrixSide.PRODUCT if expected is MatrixSide.CONTRA else MatrixSide.CONTRA
    return replace(morphism, side=other)


def _product(a: DualityMatrix, b: DualityMatrix, side: MatrixSide) -> DualityMatrix:
    """Plain matrix product a·b."""
    if a.ring != b.ring:
        raise InputError("Matrices over different rings")
    if a.is_pattern and b.is_pattern:
        return DualityMatrix.from_pattern(a.pattern @ b.pattern, side)
    if a.is_pattern or b.is_pattern:
        raise NotSummable("Products mixing finite and omega-indexed matrices are not supported")
    if a.is_element_grid != b.is_element_grid:
        raise InputError("Cannot multiply a matrix over End(M)^op by a base-ring matrix")
    if a.is_element_grid:
        return _grid_product(a, b, side)
    rows_a, inner = a.shape
    rows_b, width = b.shape
    if inner is None or width is None:
        raise NotSummable("Products of rows over omega are not supported")
    if inner != rows_b:
        raise InputError(f"Cannot multiply {rows_a}x{inner} by {rows_b}x{width}")
    left = a.to_lists()
    right = b.to_lists()
    out = []
    for y in range(rows_a):
        row = []
        for w in range(width):
            total = a.ring.zero()
            for x in range(inner):
                total = total + left[y][x] * right[x][w]
            row.append(total)
        out.append(row)
    return DualityMatrix.from_rows(a.ring, out, side)


def _grid_product(a: DualityMatrix, b: DualityMatrix, side: MatrixSide) -> DualityMatrix:
    if a.module != b.module:
        raise InputError("Matrices over different endomorphism rings")
    (rows_a, inner), (rows_b, width) = a.shape, b.shape
    if inner != rows_b:
        raise InputError(f"Cannot multiply {rows_a}x{inner} by {rows_b}x{width}")
    zero = EndoElement.zero(a.module)
    out = []
    for y in range(rows_a):
        row = []
        for w in range(width):
            total = zero
            for x in range(inner):
                total = total + a.elements[y][x] @ b.elements[x][w]
            row.append(total)
        out.append(row)
    return DualityMatrix.from_elements(out, side)


def then(first: DualityMatrix, second: DualityMatrix) -> DualityMatrix:
    """The morphism "first, then second" on the side both matrices stand for."""
    if first.side is not second.side:
        raise InputError("Cannot compose morphisms from different sides of the duality")
    if first.side is MatrixSide.CONTRA:
        return _product(first, second, first.side)
    return _product(second, first, first.side)


def apply_product_map(matrix: DualityMatrix,
                      vector: Union[FormalFamily, Sequence[EndoElement]]) -> Union[FormalFamily, Tuple[EndoElement, ...]]:
    """(Σ_x entry(y, x)·vector[x])_y for a continuous map r^X -> r^Y.

    Element grids act on finite vectors of elements of End(M)^op.
    """
    if matrix.is_element_grid:
        return _apply_grid(matrix, vector)
    if matrix.ring != vector.ring:
        raise InputError("Vector and matrix live over different rings")
    ring = matrix.ring
    if not matrix.is_pattern:
        out = tuple(_pair_sum(row, vector) for row in matrix.rows)
        return FormalFamily(ring, out, None, len(out))
    body = matrix.pattern
    offsets = [b.offset for b in body.bands] or [0]
    end = vector.support_end
    if end is not None:
        horizon = max(body.regular_from, end - min(offsets), 0)
        head = tuple(_row_value(body, y, vector) for y in range(horizon))
        return FormalFamily(ring, head)
    tail = vector.tail
    start = max(body.regular_from, tail.start - min(offsets), 0)
    head = tuple(_row_value(body, y, vector) for y in range(start))
    initial = _row_value(body, start, vector)
    return FormalFamily(ring, head, GeometricTail(start, initial, tail.ratio))


def _apply_grid(matrix: DualityMatrix, vector: Sequence[EndoElement]) -> Tuple[EndoElement, ...]:
    _, width = matrix.shape
    if isinstance(vector, FormalFamily) or len(vector) != width:
        raise InputError(f"Expected {width} elements of End(M)^op")
    vector = tuple(vector)
    if any(v.module != matrix.module for v in vector):
        raise InputError("Vector entries lie in another endomorphism ring")
    out = []
    for row in matrix.elements:
        total = EndoElement.zero(matrix.module)
        for entry, value in zip(row, vector):
            total = total + entry @ value
        out.append(total)
    return tuple(out)


def _row_value(body: PatternMatrix, y: int, vector: FormalFamily) -> AdicScalar:
    total = body.ring.zero()
    for x, value in body.row(y):
        total = total + value * vector.coefficient(x)
    return total


def projector_duality(e: EndoElement) -> Tuple[DualityMatrix, DualityMatrix]:
    """(matrix of r·e on the contramodule side, its dual); the dual is the projector for e·r."""
    contra = DualityMatrix.projector(e, MatrixSide.CONTRA)
    return contra, dual_matrix(contra, Direction.CONTRA_TO_PROD)


def projector_duality_holds(e: EndoElement) -> bool:
    """Both projector matrices are idempotent and dualizing the e·r one gives back r·e."""
    if e @ e != e:
        return False
    contra, dual = projector_duality(e)
    return (then(contra, contra) == contra and then(dual, dual) == dual
            and dual.side is MatrixSide.PRODUCT and dual.entry(0, 0) == e
            and dual_matrix(dual, Direction.PROD_TO_CONTRA) == contra)
