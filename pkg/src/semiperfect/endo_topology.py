"""
The topological ring r = End(M)^op of a decomposed module.

Elements act on the right of row vectors: block (j, i) is a map M_j -> M_i,
stored as the coefficient of the Hom generator x -> t^e x, reduced modulo the
length of Hom(M_j, M_i).  ``compose(r, s)`` means "first r, then s", which is
the matrix product r·s.

Countable modules use ``PatternMatrix`` bodies.  The open right ideals of the
finite topology are the annihilators ann(E) of finite sets of summands, i.e.
the elements whose rows indexed by E vanish.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import (Dict, FrozenSet, Iterable, List, Optional, Sequence,
                    Tuple, Union)

from .adic_core import INFINITY, AdicScalar, RingDescriptor
from .errors import BackendUnsupported, InputError, NoConvergence
from .linalg import (inverse_mod_p, nullspace_mod_p, rank_mod_p,
                     right_inverse_over_local, solve_mod_p)
from .matrices import Band, BlockMatrix, PatternMatrix
from .module_decomp import DecomposedModule, LocalModule

logger = logging.getLogger(__name__)

ScalarLike = Union[AdicScalar, int, str]


@lru_cache(maxsize=None)
def _block_tables(module: DecomposedModule) -> Tuple[tuple, tuple]:
    n = len(module.summands)
    shapes = tuple(tuple(module.hom_shape(j, i) for i in range(n)) for j in range(n))
    exponents = tuple(tuple(module.exponent(j, i) for i in range(n)) for j in range(n))
    return shapes, exponents


@dataclass(frozen=True)
class EndoElement:
    module: DecomposedModule
    body: Union[BlockMatrix, PatternMatrix]

    # -- construction ---------------------------------------------------

    @classmethod
    def from_rows(cls, module: DecomposedModule, rows: Sequence[Sequence[ScalarLike]]) -> "EndoElement":
        if module.is_countable:
            raise InputError("Countable modules take pattern matrices, not dense rows")
        n = len(module.summands)
        if len(rows) != n or any(len(row) != n for row in rows):
            raise InputError(f"Expected a {n}x{n} matrix for {module.label}")
        shapes, _ = _block_tables(module)
        ring = module.ring
        body = BlockMatrix.from_rows(
            [[ring.scalar(x).truncate(shapes[j][i]) for i, x in enumerate(row)] for j, row in enumerate(rows)])
        return cls(module, body)

    @classmethod
    def from_pattern(cls, module: DecomposedModule, pattern: PatternMatrix) -> "EndoElement":
        if not module.is_countable:
            raise InputError("Pattern matrices describe endomorphisms of countable modules only")
        if pattern.ring != module.ring:
            raise InputError(f"Pattern over {pattern.ring.label} for a module over {module.ring.label}")
        return cls(module, pattern)

    @classmethod
    def zero(cls, module: DecomposedModule) -> "EndoElement":
        if module.is_countable:
            return cls(module, PatternMatrix.zero(module.ring))
        n = len(module.summands)
        return cls.from_rows(module, [[0] * n for _ in range(n)])

    @classmethod
    def identity(cls, module: DecomposedModule) -> "EndoElement":
        if module.is_countable:
            return cls(module, PatternMatrix.identity(module.ring))
        n = len(module.summands)
        return cls.from_rows(module, [[1 if i == j else 0 for i in range(n)] for j in range(n)])

    @classmethod
    def matrix_unit(cls, module: DecomposedModule, j: int, i: int, value: ScalarLike = 1) -> "EndoElement":
        ring = module.ring
        if module.is_countable:
            return cls(module, PatternMatrix.from_sparse(ring, [(j, i, ring.scalar(value))]))
        n = len(module.summands)
        rows = [[0] * n for _ in range(n)]
        rows[j][i] = value
        return cls.from_rows(module, rows)

    @classmethod
    def diagonal(cls, module: DecomposedModule, values: Sequence[ScalarLike]) -> "EndoElement":
        n = len(values)
        return cls.from_rows(module, [[values[j] if i == j else 0 for i in range(n)] for j in range(n)])

    @classmethod
    def projector(cls, module: DecomposedModule, indices: Iterable[int]) -> "EndoElement":
        """Diagonal idempotent onto the summands ``indices``."""
        chosen = set(indices)
        if module.is_countable:
            one = module.ring.one()
            return cls(module, PatternMatrix.from_sparse(module.ring, [(j, j, one) for j in chosen]))
        _check_indices(module, chosen)
        n = len(module.summands)
        return cls.diagonal(module, [1 if j in chosen else 0 for j in range(n)])

    # -- structure ------------------------------------------------------

    @property
    def ring(self) -> RingDescriptor:
        return self.module.ring

    @property
    def is_pattern(self) -> bool:
        return isinstance(self.body, PatternMatrix)

    @property
    def size(self) -> Union[int, float]:
        return self.module.size

    def entry(self, j: int, i: int) -> AdicScalar:
        return self.body.entry(j, i)

    def row(self, j: int) -> List[Tuple[int, AdicScalar]]:
        if self.is_pattern:
            return self.body.row(j)
        return [(i, x) for i, x in enumerate(self.body.rows[j]) if not x.is_zero()]

    def is_zero(self) -> bool:
        if self.is_pattern:
            return self.body.is_zero()
        return all(x.is_zero() for row in self.body.rows for x in row)

    def rows_vanish(self, indices: Iterable[int]) -> bool:
        return all(not self.row(j) for j in indices)

    def _same_module(self, other: "EndoElement") -> None:
        if not isinstance(other, EndoElement) or other.module != self.module:
            raise InputError("Elements of different endomorphism rings cannot be combined")

    def _pointwise(self, other: "EndoElement", sign: int) -> "EndoElement":
        self._same_module(other)
        if self.is_pattern:
            return EndoElement(self.module, self.body + other.body if sign > 0 else self.body - other.body)
        shapes, _ = _block_tables(self.module)
        return EndoElement(self.module, self.body.map_entries(
            lambda j, i, x: (x + other.entry(j, i) if sign > 0 else x - other.entry(j, i)).truncate(shapes[j][i])))

    def __add__(self, other: "EndoElement") -> "EndoElement":
        return self._pointwise(other, 1)

    def __sub__(self, other: "EndoElement") -> "EndoElement":
        return self._pointwise(other, -1)

    def __neg__(self) -> "EndoElement":
        return EndoElement.zero(self.module) - self

    def scale(self, scalar: ScalarLike) -> "EndoElement":
        c = self.ring.scalar(scalar)
        if self.is_pattern:
            return EndoElement(self.module, self.body.scale(c))
        shapes, _ = _block_tables(self.module)
        return EndoElement(self.module, self.body.map_entries(lambda j, i, x: (c * x).truncate(shapes[j][i])))

    def __matmul__(self, other: "EndoElement") -> "EndoElement":
        return compose(self, other)

    def power(self, exponent: int) -> "EndoElement":
        result = EndoElement.identity(self.module)
        for _ in range(exponent):
            result = result @ self
        return result

    def transpose(self) -> "EndoElement":
        """Anti-automorphism of the matrix ring; defined for uniform modules."""
        if not self.module.is_uniform:
            raise BackendUnsupported("Transposition needs all summands in one iso class")
        return EndoElement(self.module, self.body.transpose())

    # -- coordinates over F_p -------------------------------------------

    def coefficient_vector(self) -> List[int]:
        """Coordinates over F_p, block by block (finite modules only)."""
        if self.is_pattern:
            raise BackendUnsupported("Coefficient vectors exist for finite modules only")
        shapes, _ = _block_tables(self.module)
        vector: List[int] = []
        for j, row in enumerate(self.body.rows):
            for i, x in enumerate(row):
                vector.extend(x.series(shapes[j][i]))
        return vector

    @classmethod
    def from_vector(cls, module: DecomposedModule, vector: Sequence[int]) -> "EndoElement":
        shapes, _ = _block_tables(module)
        n = len(module.summands)
        rows = []
        position = 0
        for j in range(n):
            row = []
            for i in range(n):
                width = shapes[j][i]
                row.append(AdicScalar.from_coefficients(module.ring, vector[position:position + width]))
                position += width
            rows.append(row)
        if position != len(vector):
            raise InputError(f"Coefficient vector of length {len(vector)} does not match {module.label}")
        return cls.from_rows(module, rows)

    def __str__(self) -> str:
        if self.is_pattern:
            return str(self.body)
        return "[" + ", ".join("[" + ", ".join(str(x) for x in row) + "]" for row in self.body.rows) + "]"


def _check_indices(module: DecomposedModule, indices: Iterable[int]) -> None:
    for j in indices:
        if j < 0 or (not module.is_countable and j >= len(module.summands)):
            raise InputError(f"Summand index {j} out of range for {module.label}")


def dimension(module: DecomposedModule) -> int:
    shapes, _ = _block_tables(module)
    return sum(sum(row) for row in shapes)


def elementary_basis(module: DecomposedModule) -> List[EndoElement]:
    """F_p basis of r: the elements t^k·(generator of block (j, i))."""
    size = dimension(module)
    basis = []
    for position in range(size):
        vector = [0] * size
        vector[position] = 1
        basis.append(EndoElement.from_vector(module, vector))
    return basis


def jacobson_basis(module: DecomposedModule) -> List[EndoElement]:
    """F_p basis of the topological Jacobson radical of a finite module."""
    shapes, _ = _block_tables(module)
    n = len(module.summands)
    size = dimension(module)
    basis = []
    position = 0
    for j in range(n):
        for i in range(n):
            same_class = module.summand(j) == module.summand(i)
            for k in range(shapes[j][i]):
                if not (same_class and k == 0):
                    vector = [0] * size
                    vector[position + k] = 1
                    basis.append(EndoElement.from_vector(module, vector))
            position += shapes[j][i]
    return basis


def compose(r: EndoElement, s: EndoElement) -> EndoElement:
    """Product in End(M)^op: act by r, then by s."""
    r._same_module(s)
    module = r.module
    if r.is_pattern:
        return EndoElement(module, r.body @ s.body)
    shapes, exponents = _block_tables(module)
    ring = module.ring
    t = ring.uniformizer()
    n = len(module.summands)
    rows = []
    for j in range(n):
        row = []
        for l in range(n):
            acc = ring.zero()
            if shapes[j][l]:
                for i in range(n):
                    a = r.body.rows[j][i]
                    b = s.body.rows[i][l]
                    if a.is_zero() or b.is_zero():
                        continue
                    shift = exponents[j][i] + exponents[i][l] - exponents[j][l]
                    acc = acc + a * b * t ** shift
            row.append(acc.truncate(shapes[j][l]))
        rows.append(tuple(row))
    return EndoElement(module, BlockMatrix(tuple(rows)))


def adic_order(r: EndoElement) -> Union[int, float]:
    """t-adic order of r as a map; super-multiplicative under compose."""
    if r.is_pattern:
        values = [b.entry for b in r.body.bands] + [v for _, _, v in r.body.sparse]
        return min((v.valuation() for v in values), default=INFINITY)
    _, exponents = _block_tables(r.module)
    return min((x.valuation() + exponents[j][i]
                for j, row in enumerate(r.body.rows) for i, x in enumerate(row) if not x.is_zero()),
               default=INFINITY)


# -- open ideals and zero-convergence ----------------------------------------

@dataclass(frozen=True)
class OpenIdealDescriptor:
    """ann(⊕_{z in E} M_z): elements whose rows indexed by E vanish."""
    module: DecomposedModule
    generators: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "generators", frozenset(self.generators))
        _check_indices(self.module, self.generators)

    def contains(self, r: EndoElement) -> bool:
        return r.rows_vanish(self.generators)

    @classmethod
    def initial_segment(cls, module: DecomposedModule, k: int) -> "OpenIdealDescriptor":
        return cls(module, frozenset(range(k + 1)))


def canonical_chain(module: DecomposedModule, depth: Optional[int] = None) -> List[OpenIdealDescriptor]:
    """I_0 ⊃ I_1 ⊃ ... with I_k = ann(M_0 ⊕ ... ⊕ M_k)."""
    if depth is None:
        if module.is_countable:
            raise InputError("A depth is needed for the chain of a countable module")
        depth = len(module.summands)
    if not module.is_countable:
        depth = min(depth, len(module.summands))
    return [OpenIdealDescriptor.initial_segment(module, k) for k in range(depth)]


TemplateEntry = Tuple[int, int, AdicScalar]


@dataclass(frozen=True)
class TranslatedFamily:
    """Countable family (x_m)_{m >= start} of elements of End(free^omega)^op.

    Member m has entry ``value`` at (row_offset + m, col_offset + m) for every
    template entry, plus the same ``constant`` matrix for every m.
    """
    module: DecomposedModule
    template: Tuple[TemplateEntry, ...]
    start: int = 0
    constant: Optional[PatternMatrix] = None

    def __post_init__(self):
        if not self.module.is_countable:
            raise InputError("Translated families live on countable modules")
        object.__setattr__(self, "template", tuple(self.template))
        for row_offset, col_offset, value in self.template:
            if value.ring != self.module.ring:
                raise InputError("Template values must lie in the module's base ring")
            if row_offset + self.start < 0 or col_offset + self.start < 0:
                raise InputError("Template reaches negative indices at the first member")
        if self.constant is not None and self.constant.is_zero():
            object.__setattr__(self, "constant", None)

    def member(self, m: int) -> EndoElement:
        if m < self.start:
            raise InputError(f"Member {m} precedes the family start {self.start}")
        ring = self.module.ring
        body = PatternMatrix.from_sparse(ring, [(r + m, c + m, v) for r, c, v in self.template])
        if self.constant is not None:
            body = body + self.constant
        return EndoElement(self.module, body)

    @property
    def row_offsets(self) -> Tuple[int, ...]:
        return tuple(sorted({r for r, _, v in self.template if not v.is_zero()}))

    @property
    def col_offsets(self) -> Tuple[int, ...]:
        return tuple(sorted({c for _, c, v in self.template if not v.is_zero()}))

    @property
    def interaction_shifts(self) -> Tuple[int, ...]:
        """Shifts d for which member m times member m + d can be nonzero."""
        return tuple(sorted({c - r for c in self.col_offsets for r in self.row_offsets}))

    @property
    def span(self) -> int:
        offsets = self.row_offsets + self.col_offsets
        return max(offsets) - min(offsets) if offsets else 0

    def members_touching(self, rows: Iterable[int]) -> Optional[List[int]]:
        """Indices of members with a nonzero row in ``rows``; None when infinitely many."""
        rows = set(rows)
        if self.constant is not None and any(self.constant.row(j) for j in rows):
            return None
        return sorted({j - r for j in rows for r in self.row_offsets if j - r >= self.start})

    def pattern_sum(self) -> PatternMatrix:
        """Σ_m x_m as a banded matrix (requires zero-convergence)."""
        if self.constant is not None:
            raise InputError("A family with a constant part does not converge")
        bands = [Band(c - r, v, self.start + r) for r, c, v in self.template]
        return PatternMatrix.build(self.module.ring, bands)

    def map_values(self, fn, module: DecomposedModule) -> "TranslatedFamily":
        constant = None if self.constant is None else self.constant.map_entries(fn, ring=module.ring)
        return TranslatedFamily(module, tuple((r, c, fn(v)) for r, c, v in self.template), self.start, constant)


def is_zero_convergent(family: Union[Sequence[EndoElement], TranslatedFamily],
                       basis: Optional[Sequence[OpenIdealDescriptor]] = None) -> bool:
    """Every open ideal of ``basis`` contains all but finitely many members.

    Without a basis the answer is decided from the family description; for a
    translated family that means its constant part vanishes.
    """
    if not isinstance(family, TranslatedFamily):
        return True
    if basis is None:
        return family.constant is None
    return all(family.members_touching(ideal.generators) is not None for ideal in basis)


# -- radical and semisimple quotient ---------------------------------------

def jacobson_membership(h: EndoElement) -> bool:
    """True iff every block between isomorphic summands is a nonunit."""
    if h.is_pattern:
        values = [b.entry for b in h.body.bands] + [v for _, _, v in h.body.sparse]
        return not any(v.is_unit() for v in values)
    module = h.module
    for j, row in enumerate(h.body.rows):
        for i, x in enumerate(row):
            if module.summand(j) == module.summand(i) and x.is_unit():
                return False
    return True


@dataclass(frozen=True)
class SemisimpleElement:
    """Image of an element in S = r/h: one residue matrix per iso class."""
    module: DecomposedModule
    components: Tuple[Tuple[LocalModule, EndoElement], ...]

    def component(self, key: LocalModule) -> EndoElement:
        for k, value in self.components:
            if k == key:
                return value
        raise KeyError(key)

    @classmethod
    def from_components(cls, module: DecomposedModule, components: Dict[LocalModule, EndoElement]) -> "SemisimpleElement":
        ordered = []
        for key in module.iso_classes:
            carrier = module.class_residue_module(key)
            value = components.get(key, EndoElement.zero(carrier))
            if value.module != carrier:
                raise InputError(f"Residue component for {key} must live on {carrier.label}")
            ordered.append((key, value))
        return cls(module, tuple(ordered))

    @classmethod
    def from_residue_rows(cls, module: DecomposedModule, blocks: Dict[LocalModule, Sequence[Sequence[int]]]) -> "SemisimpleElement":
        return cls.from_components(module, {
            key: EndoElement.from_rows(module.class_residue_module(key), rows) for key, rows in blocks.items()})

    @classmethod
    def identity(cls, module: DecomposedModule) -> "SemisimpleElement":
        return cls.from_components(module, {key: EndoElement.identity(module.class_residue_module(key))
                                            for key in module.iso_classes})

    @classmethod
    def zero(cls, module: DecomposedModule) -> "SemisimpleElement":
        return cls.from_components(module, {})

    def _combine(self, other: "SemisimpleElement", op) -> "SemisimpleElement":
        if other.module != self.module:
            raise InputError("Residues of different rings cannot be combined")
        return SemisimpleElement(self.module, tuple(
            (key, op(value, other.component(key))) for key, value in self.components))

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __matmul__(self, other):
        return self._combine(other, compose)

    def is_zero(self) -> bool:
        return all(value.is_zero() for _, value in self.components)

    def is_idempotent(self) -> bool:
        return self @ self == self

    def rank(self) -> Union[int, float]:
        """Total residue rank; INFINITY when a band survives modulo t."""
        total = 0
        for _, value in self.components:
            if value.is_pattern:
                if value.body.bands:
                    return INFINITY
                indices = sorted({j for j, _, _ in value.body.sparse} | {i for _, i, _ in value.body.sparse})
                position = {k: n for n, k in enumerate(indices)}
                dense = [[0] * len(indices) for _ in indices]
                for j, i, v in value.body.sparse:
                    dense[position[j]][position[i]] = v.residue()
                total += rank_mod_p(dense, self.module.ring.prime)
            else:
                total += rank_mod_p(_residue_rows(value), self.module.ring.prime)
        return total

    def inverse(self) -> Optional["SemisimpleElement"]:
        """Inverse over the residue fields, or None; finite modules only."""
        if self.module.is_countable:
            raise BackendUnsupported("Residue inversion of banded matrices is not supported")
        inverses = {}
        for key, value in self.components:
            rows = inverse_mod_p(_residue_rows(value), self.module.ring.prime)
            if rows is None:
                return None
            inverses[key] = EndoElement.from_rows(value.module, rows)
        return SemisimpleElement.from_components(self.module, inverses)


def _residue_rows(value: EndoElement) -> List[List[int]]:
    return [[x.residue() for x in row] for row in value.body.rows]


def project_to_semisimple(r: EndoElement) -> SemisimpleElement:
    """Ring map r -> S with kernel the topological Jacobson radical.

    Compatible isomorphisms inside an iso class are the identities on the
    canonical generators, so a same-class block maps to its residue.
    """
    module = r.module
    if r.is_pattern:
        carrier = DecomposedModule.residue_omega(module.ring.prime)
        residue_body = r.body.map_entries(lambda x: x.reduce_to(carrier.ring), ring=carrier.ring)
        return SemisimpleElement(module, ((module.omega, EndoElement(carrier, residue_body)),))
    components = []
    for key, indices in module.iso_classes.items():
        carrier = module.class_residue_module(key)
        rows = [[r.body.rows[a][b].residue() for b in indices] for a in indices]
        components.append((key, EndoElement.from_rows(carrier, rows)))
    return SemisimpleElement(module, tuple(components))


def section_lift(s: SemisimpleElement) -> EndoElement:
    """Lift residues to constants in same-class positions."""
    module = s.module
    ring = module.ring
    if module.is_countable:
        residue = s.component(module.omega)
        return EndoElement(module, residue.body.map_entries(lambda x: x.lift_to(ring), ring=ring))
    n = len(module.summands)
    rows: List[List[ScalarLike]] = [[0] * n for _ in range(n)]
    for key, indices in module.iso_classes.items():
        value = s.component(key)
        for a, j in enumerate(indices):
            for b, i in enumerate(indices):
                rows[j][i] = value.body.rows[a][b].residue()
    return EndoElement.from_rows(module, rows)


def section_lift_family(family: Union[Sequence[SemisimpleElement], TranslatedFamily],
                        module: DecomposedModule) -> Union[List[EndoElement], TranslatedFamily]:
    """Lift a zero-convergent family of residues member by member.

    Translated families keep their template positions, so zero-convergence is
    preserved.
    """
    if isinstance(family, TranslatedFamily):
        return family.map_values(lambda x: x.lift_to(module.ring), module)
    return [section_lift(s) for s in family]


# -- linear systems ----------------------------------------------------------

def _shifted(value: AdicScalar, shift: int, length: int) -> List[int]:
    return (value * value.ring.uniformizer() ** shift).series(length)


def solve_right(a: EndoElement, b: EndoElement) -> Optional[EndoElement]:
    """Some x with compose(a, x) = b, or None (finite modules)."""
    a._same_module(b)
    if a.is_pattern:
        raise BackendUnsupported("Linear systems over countable modules are solved by is_locally_split_mono")
    module = a.module
    shapes, exponents = _block_tables(module)
    p = module.ring.prime
    n = len(module.summands)
    solution = [[module.ring.zero() for _ in range(n)] for _ in range(n)]
    for l in range(n):
        unknowns = [(i, k) for i in range(n) for k in range(shapes[i][l])]
        equations = [(j, c) for j in range(n) for c in range(shapes[j][l])]
        if not equations:
            continue
        columns = []
        for i, k in unknowns:
            column = []
            for j in range(n):
                shift = k + exponents[j][i] + exponents[i][l] - exponents[j][l]
                column.extend(_shifted(a.body.rows[j][i], shift, shapes[j][l]))
            columns.append(column)
        matrix = [[columns[u][e] for u in range(len(unknowns))] for e in range(len(equations))]
        rhs = [c for j in range(n) for c in b.body.rows[j][l].series(shapes[j][l])]
        if not unknowns:
            if any(rhs):
                return None
            continue
        coefficients = solve_mod_p(matrix, rhs, p)
        if coefficients is None:
            return None
        for (i, k), value in zip(unknowns, coefficients):
            if value:
                solution[i][l] = solution[i][l] + module.ring.uniformizer() ** k * value
    return EndoElement.from_rows(module, solution)


def solve_left(a: EndoElement, b: EndoElement) -> Optional[EndoElement]:
    """Some x with compose(x, a) = b, or None (finite modules)."""
    a._same_module(b)
    if a.is_pattern:
        raise BackendUnsupported("Linear systems over countable modules are not supported")
    module = a.module
    shapes, exponents = _block_tables(module)
    p = module.ring.prime
    n = len(module.summands)
    solution = [[module.ring.zero() for _ in range(n)] for _ in range(n)]
    for j in range(n):
        unknowns = [(i, k) for i in range(n) for k in range(shapes[j][i])]
        equations = [(l, c) for l in range(n) for c in range(shapes[j][l])]
        if not equations:
            continue
        columns = []
        for i, k in unknowns:
            column = []
            for l in range(n):
                shift = k + exponents[j][i] + exponents[i][l] - exponents[j][l]
                column.extend(_shifted(a.body.rows[i][l], shift, shapes[j][l]))
            columns.append(column)
        matrix = [[columns[u][e] for u in range(len(unknowns))] for e in range(len(equations))]
        rhs = [c for l in range(n) for c in b.body.rows[j][l].series(shapes[j][l])]
        if not unknowns:
            if any(rhs):
                return None
            continue
        coefficients = solve_mod_p(matrix, rhs, p)
        if coefficients is None:
            return None
        for (i, k), value in zip(unknowns, coefficients):
            if value:
                solution[j][i] = solution[j][i] + module.ring.uniformizer() ** k * value
    return EndoElement.from_rows(module, solution)


# -- invertibility -----------------------------------------------------------

class Decision(Enum):
    INVERTIBLE = "invertible"
    NOT_INVERTIBLE = "not_invertible"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ResidueCertificate:
    """The image in S is not invertible: ``vector``·residue = 0, or a residue row vanishes."""
    reason: str
    iso_class: str
    rows: Tuple[int, ...]
    vector: Tuple[int, ...] = ()


@dataclass(frozen=True)
class LevelEvidence:
    level: int
    window: int
    support: int
    coefficients: Tuple[Tuple[int, str], ...]


@dataclass(frozen=True)
class SupportGrowthCertificate:
    """Every solution y of y·u = b_row has at least ``level`` nonzero coordinates
    below ``window``, for each recorded level; so no row-finite solution exists.
    """
    row: int
    offset: int
    entry: str
    levels: Tuple[LevelEvidence, ...]

    def holds(self) -> bool:
        return all(evidence.support >= evidence.level for evidence in self.levels)


Certificate = Union[ResidueCertificate, SupportGrowthCertificate]


@dataclass(frozen=True)
class InvertibilityResult:
    decision: Decision
    inverse: Optional[EndoElement] = None
    certificate: Optional[Certificate] = None
    reason: str = ""

    @property
    def is_invertible(self) -> bool:
        return self.decision is Decision.INVERTIBLE

    @property
    def is_not_invertible(self) -> bool:
        return self.decision is Decision.NOT_INVERTIBLE


def decide_invertible(u: EndoElement, levels: int = 8, max_workers: int = 4) -> InvertibilityResult:
    if u.is_pattern:
        return _decide_pattern(u, levels, max_workers)
    return _decide_finite(u)


def _decide_finite(u: EndoElement) -> InvertibilityResult:
    module = u.module
    p = module.ring.prime
    residue = project_to_semisimple(u)
    inverse_residue = residue.inverse()
    if inverse_residue is None:
        for key, value in residue.components:
            rows = _residue_rows(value)
            transposed = [list(col) for col in zip(*rows)]
            kernel = nullspace_mod_p(transposed, len(rows), p)
            if kernel:
                indices = module.iso_classes[key]
                return InvertibilityResult(Decision.NOT_INVERTIBLE, certificate=ResidueCertificate(
                    "residue matrix is singular", str(key), tuple(indices), tuple(kernel[0])))
        raise NoConvergence("Singular residue without a kernel vector")
    approximate = section_lift(inverse_residue)
    nilpotent = EndoElement.identity(module) - u @ approximate
    correction = EndoElement.identity(module)
    power = nilpotent
    steps = 0
    while not power.is_zero():
        if steps > module.ring.precision + 1:
            raise NoConvergence(f"Radical element did not vanish after {steps} squarings")
        correction = correction @ (EndoElement.identity(module) + power)
        power = power @ power
        steps += 1
    inverse = approximate @ correction
    logger.debug(f"Inverse over {module.label} found with {steps} squarings")
    return InvertibilityResult(Decision.INVERTIBLE, inverse=inverse)


def _diagonal_part(body: PatternMatrix) -> PatternMatrix:
    return PatternMatrix.build(body.ring, [b for b in body.bands if b.offset == 0],
                               [(j, i, v) for j, i, v in body.sparse if j == i])


def _support_level(n_prime: PatternMatrix, d_inv: PatternMatrix, row: int, offset: int, level: int) -> LevelEvidence:
    ring = n_prime.ring
    window = row + (level - 1) * offset + 1
    z: List[AdicScalar] = []
    for k in range(window):
        value = ring.one() if k == row else ring.zero()
        for i, entry in n_prime.column_entries(k):
            if i < k:
                value = value + z[i] * entry
        z.append(value)
    y = [z[k] * d_inv.entry(k, k) for k in range(window)]
    coefficients = tuple((k, str(v)) for k, v in enumerate(y) if not v.is_zero())
    return LevelEvidence(level, window, len(coefficients), coefficients)


def _decide_pattern(u: EndoElement, levels: int, max_workers: int) -> InvertibilityResult:
    module = u.module
    body = u.body
    if jacobson_membership(u):
        return InvertibilityResult(Decision.NOT_INVERTIBLE, certificate=ResidueCertificate(
            "element lies in the topological Jacobson radical", str(module.omega), ()))
    for j in range(body.regular_from + 1):
        if all(not v.is_unit() for _, v in body.row(j)):
            return InvertibilityResult(Decision.NOT_INVERTIBLE, certificate=ResidueCertificate(
                "residue row vanishes", str(module.omega), (j,)))
    diagonal = _diagonal_part(body)
    if not all(diagonal.entry(j, j).is_unit() for j in range(body.regular_from + 1)) or \
            not any(b.offset == 0 for b in diagonal.bands):
        return InvertibilityResult(Decision.UNKNOWN, reason="diagonal part is not a unit")
    d_inv = diagonal.map_entries(lambda x: x.invert())
    n_prime = PatternMatrix.identity(module.ring) - d_inv @ body

    if n_prime.is_zero():
        return InvertibilityResult(Decision.INVERTIBLE, inverse=EndoElement(module, d_inv))

    if len(n_prime.bands) == 1 and not n_prime.sparse and n_prime.bands[0].offset > 0:
        band = n_prime.bands[0]
        row = band.start
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            futures = [executor.submit(_support_level, n_prime, d_inv, row, band.offset, level)
                       for level in range(1, levels + 1)]
            evidence = tuple(future.result() for future in futures)
        certificate = SupportGrowthCertificate(row, band.offset, str(band.entry), evidence)
        if not certificate.holds():
            raise NoConvergence("Support-growth evidence is inconsistent with a single upper band")
        logger.debug(f"Support growth certified from row {row} over {levels} levels")
        return InvertibilityResult(Decision.NOT_INVERTIBLE, certificate=certificate)

    if not n_prime.bands:
        support = {j for j, _, _ in n_prime.sparse} | {i for _, i, _ in n_prime.sparse}
        power = n_prime
        total = PatternMatrix.identity(module.ring) + n_prime
        for _ in range(len(support) + 1):
            power = power @ n_prime
            if power.is_zero():
                return InvertibilityResult(Decision.INVERTIBLE, inverse=EndoElement(module, total @ d_inv))
            total = total + power
    return InvertibilityResult(Decision.UNKNOWN, reason="cancellation between support paths cannot be excluded")


# -- locally split monomorphisms ---------------------------------------------

def is_locally_split_mono(u: EndoElement, indices: Iterable[int]) -> Union[EndoElement, bool]:
    """A g with (x·u)·g = x on ⊕_{z in E} M_z, or False when none exists."""
    chosen = sorted(set(indices))
    module = u.module
    _check_indices(module, chosen)
    projector = EndoElement.projector(module, chosen)
    if not u.is_pattern:
        witness = solve_right(projector @ u, projector)
        return False if witness is None else witness
    support = u.body.row_support(chosen)
    if not support:
        return False if chosen else EndoElement.zero(module)
    block = [[u.entry(j, i) for i in support] for j in chosen]
    found = right_inverse_over_local(module.ring, block)
    if found is None:
        return False
    g_rows, _ = found
    entries = [(support[w], chosen[e], value)
               for w, row in enumerate(g_rows) for e, value in enumerate(row) if not value.is_zero()]
    witness = EndoElement(module, PatternMatrix.from_sparse(module.ring, entries))
    if projector @ u @ witness != projector:
        return False
    return witness
