"""
Radicals and projective covers of finitely generated discrete modules.

A module is presented as P/K with P = ⊕ e_i·r (right side) or ⊕ r·e_i (left
side, the finitely generated projective contramodules), e_i local idempotents,
and K generated by the relations.  Everything is computed as F_p-linear
algebra on coefficient vectors, which is exact because r is finite over F_p in
the truncated backend.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

from .adic_core import AdicScalar
from .endo_topology import (EndoElement, ScalarLike, SemisimpleElement,
                            elementary_basis, jacobson_basis, section_lift,
                            solve_left, solve_right)
from .errors import (BackendUnsupported, InputError, InvariantViolation,
                     NotPrimitiveResidue)
from .idempotent_calculus import (IdempotentKind, classify_idempotent,
                                  hensel_lift_idempotent)
from .linalg import independent_rows_mod_p, nullspace_mod_p, rank_mod_p
from .module_decomp import DecomposedModule

logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]


class Side(Enum):
    RIGHT = "right"
    LEFT = "left"


def _act(x: EndoElement, b: EndoElement, side: Side) -> EndoElement:
    return x @ b if side is Side.RIGHT else b @ x


def _pivot(e: EndoElement) -> int:
    """First summand on which the local idempotent e has a unit diagonal entry."""
    for k in range(len(e.module.summands)):
        if e.entry(k, k).is_unit():
            return k
    raise NotPrimitiveResidue(f"{e} has no unit on the diagonal")


def relation_component(e: EndoElement, side: Side, values: Sequence[ScalarLike]) -> EndoElement:
    """The element of e·r (right side) or r·e (left side) written as ``values``.

    With k the pivot of e, ``values`` is row k (right) or column k (left) of a
    matrix u supported there, and the component is e·u, respectively u·e.
    Every element of the summand has this form since e lies in e·E_kk·r.
    """
    module = e.module
    n = len(module.summands)
    if len(values) != n:
        raise InputError(f"A relation component has {n} entries, got {len(values)}")
    k = _pivot(e)
    grid: List[List[ScalarLike]] = [[0] * n for _ in range(n)]
    for i, value in enumerate(values):
        if side is Side.RIGHT:
            grid[k][i] = value
        else:
            grid[i][k] = value
    return _act(e, EndoElement.from_rows(module, grid), side)


def relation_values(e: EndoElement, side: Side, x: EndoElement) -> List[AdicScalar]:
    """Pivot row or column u with relation_component(e, side, u) = x."""
    k = _pivot(e)
    unit = EndoElement.matrix_unit(e.module, k, k)
    if side is Side.RIGHT:
        z = solve_right(e @ unit, x)
    else:
        z = solve_left(unit @ e, x)
    if z is None:
        raise InputError(f"{x} is not in the summand generated by {e}")
    n = len(e.module.summands)
    if side is Side.RIGHT:
        return [z.entry(k, i) for i in range(n)]
    return [z.entry(i, k) for i in range(n)]


@dataclass(frozen=True)
class FgDiscreteModule:
    module: DecomposedModule
    generators: Tuple[EndoElement, ...]
    relations: Tuple[Tuple[EndoElement, ...], ...] = ()
    side: Side = Side.RIGHT

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "relations", tuple(tuple(r) for r in self.relations))
        if self.module.is_countable or not self.module.ring.is_truncated:
            raise BackendUnsupported("Finitely generated discrete modules are modeled over truncated rings")
        for index, e in enumerate(self.generators):
            if e.module != self.module:
                raise InputError("Generators must be elements of the module's endomorphism ring")
            if classify_idempotent(e) is not IdempotentKind.LOCAL_IDEMPOTENT:
                raise NotPrimitiveResidue(f"Generator {index} is not a local idempotent")
        for relation in self.relations:
            if len(relation) != len(self.generators):
                raise InputError("Each relation needs one component per generator")
            for e, x in zip(self.generators, relation):
                if _act(e, x, self.side) != x:
                    raise InputError(f"Relation component {x} is not in the summand generated by {e}")

    @property
    def rank(self) -> int:
        return len(self.generators)

    def embed(self, index: int, element: EndoElement) -> Tuple[EndoElement, ...]:
        zero = EndoElement.zero(self.module)
        return tuple(element if k == index else zero for k in range(self.rank))


def _vector(components: Sequence[EndoElement]) -> List[int]:
    out: List[int] = []
    for x in components:
        out.extend(x.coefficient_vector())
    return out


def _basis(vectors: Sequence[Sequence[int]], p: int) -> List[List[int]]:
    vectors = [list(v) for v in vectors if any(v)]
    return [vectors[i] for i in independent_rows_mod_p(vectors, p)]


def _contains(span: Sequence[Sequence[int]], vector: Sequence[int], p: int) -> bool:
    if not any(vector):
        return True
    if not span:
        return False
    return rank_mod_p(list(span) + [list(vector)], p) == rank_mod_p(list(span), p)


def _generated(m: FgDiscreteModule, elements: Sequence[Sequence[EndoElement]]) -> List[List[int]]:
    """F_p basis of the submodule generated by elements of ⊕ e_i r."""
    basis = elementary_basis(m.module)
    vectors = [_vector([_act(x, b, m.side) for x in element]) for element in elements for b in basis]
    return _basis(vectors, m.module.ring.prime)


def _component(m: FgDiscreteModule, index: int, multipliers: Sequence[EndoElement]) -> List[List[int]]:
    e = m.generators[index]
    vectors = [_vector(m.embed(index, _act(e, b, m.side))) for b in multipliers]
    return _basis(vectors, m.module.ring.prime)


@dataclass(frozen=True)
class RadicalResult:
    """rad(M) = M·h as (P·h + K)/K, and M/rad(M) = ⊕ of the simple images of some generators."""
    target: FgDiscreteModule
    radical_span: Tuple[Vector, ...]
    relation_dimension: int
    simple_generators: Tuple[int, ...]
    simple_dimensions: Tuple[int, ...]
    quotient_dimension: int

    @property
    def radical_dimension(self) -> int:
        return len(self.radical_span) - self.relation_dimension

    @property
    def is_semisimple_quotient(self) -> bool:
        return sum(self.simple_dimensions) == self.quotient_dimension


def radical_of_fg_discrete(m: FgDiscreteModule) -> RadicalResult:
    p = m.module.ring.prime
    full = elementary_basis(m.module)
    radical = jacobson_basis(m.module)
    components = [_component(m, i, full) for i in range(m.rank)]
    total_dimension = sum(len(c) for c in components)
    relations = _generated(m, m.relations)
    span = _basis([v for i in range(m.rank) for v in _component(m, i, radical)] + relations, p)
    quotient_dimension = total_dimension - len(span)

    picked: List[int] = []
    dimensions: List[int] = []
    current = list(span)
    for i in range(m.rank):
        generator = _vector(m.embed(i, m.generators[i]))
        if _contains(current, generator, p):
            continue
        picked.append(i)
        dimensions.append(len(components[i]) - len(_component(m, i, radical)))
        current = _basis(current + components[i], p)
    result = RadicalResult(m, tuple(tuple(v) for v in span), len(relations), tuple(picked), tuple(dimensions),
                           quotient_dimension)
    if not result.is_semisimple_quotient or len(current) != total_dimension:
        raise InvariantViolation("Generator images do not decompose M/M·h into simples")
    logger.debug(f"Radical of dimension {result.radical_dimension}; quotient has {len(picked)} simple summands")
    return result


@dataclass(frozen=True)
class CoverResult:
    """Surjection ⊕ source_k → M sending the k-th generator to ``images[k]``.

    ``kernel_span`` lists F_p coordinates of the kernel inside the source.
    """
    target: FgDiscreteModule
    source: Tuple[EndoElement, ...]
    images: Tuple[Tuple[EndoElement, ...], ...]
    kernel_span: Tuple[Vector, ...]

    @property
    def side(self) -> Side:
        return self.target.side

    def source_module(self) -> FgDiscreteModule:
        return FgDiscreteModule(self.target.module, self.source, (), self.target.side)

    def verify(self) -> bool:
        """Surjective, kernel inside source·h, and an isomorphism modulo radicals."""
        try:
            check = _cover_certificate(self.target, self.source, self.images)
        except InvariantViolation:
            return False
        return check == self.kernel_span


def _cover_certificate(target: FgDiscreteModule, source: Sequence[EndoElement],
                       images: Sequence[Sequence[EndoElement]]) -> Tuple[Vector, ...]:
    module = target.module
    p = module.ring.prime
    side = target.side
    source_module = FgDiscreteModule(module, tuple(source), (), side)
    full = elementary_basis(module)
    radical = jacobson_basis(module)

    source_vectors: List[List[int]] = []
    image_vectors: List[List[int]] = []
    for k, e in enumerate(source):
        for b in full:
            x = _act(e, b, side)
            source_vectors.append(_vector(source_module.embed(k, x)))
            image_vectors.append(_vector([_act(y, x, side) for y in images[k]]))
    keep = independent_rows_mod_p(source_vectors, p) if source_vectors else []
    source_vectors = [source_vectors[i] for i in keep]
    image_vectors = [image_vectors[i] for i in keep]

    relations = _generated(target, target.relations)
    whole = _basis([v for i in range(target.rank) for v in _component(target, i, full)], p)
    covered = _basis(image_vectors + relations, p)
    if len(covered) != len(whole):
        raise InvariantViolation("Cover map is not surjective")

    columns = image_vectors + relations
    width = len(whole[0]) if whole else 0
    if columns:
        rows = [[column[r] for column in columns] for r in range(width)]
        null = nullspace_mod_p(rows, len(columns), p)
    else:
        null = []
    kernel = []
    for combination in null:
        vector = [0] * (len(source_vectors[0]) if source_vectors else 0)
        for weight, s in zip(combination[:len(source_vectors)], source_vectors):
            if weight:
                vector = [(a + weight * b) % p for a, b in zip(vector, s)]
        kernel.append(vector)
    kernel = _basis(kernel, p)

    source_radical = _basis([v for k in range(len(source)) for v in _component(source_module, k, radical)], p)
    if any(not _contains(source_radical, v, p) for v in kernel):
        raise InvariantViolation("Cover kernel is not contained in source·h")
    residue_dimension = len(source_vectors) - len(source_radical)
    if residue_dimension != radical_of_fg_discrete(target).quotient_dimension:
        raise InvariantViolation("Cover does not induce an isomorphism modulo the radicals")
    return tuple(tuple(v) for v in kernel)


def projective_cover_simple(module: DecomposedModule, g: SemisimpleElement, side: Side = Side.RIGHT) -> CoverResult:
    """e·r → e·r/e·h for the Newton lift e of a primitive residue idempotent g."""
    if g.module != module:
        raise InputError("Residue idempotent belongs to another ring")
    if not g.is_idempotent() or g.rank() != 1:
        raise NotPrimitiveResidue("Simple modules correspond to primitive residue idempotents")
    e = hensel_lift_idempotent(section_lift(g))
    radical_part = [_act(e, b, side) for b in jacobson_basis(module)]
    relations = tuple((h,) for h in _independent_elements(module, radical_part))
    target = FgDiscreteModule(module, (e,), relations, side)
    kernel = _cover_certificate(target, (e,), ((e,),))
    key = next(key for key, value in g.components if not value.is_zero())
    simple_dimension = len(module.iso_classes[key])
    reference = FgDiscreteModule(module, (e,), (), side)
    full = _component(reference, 0, elementary_basis(module))
    rad = _component(reference, 0, jacobson_basis(module))
    if len(full) - len(rad) != simple_dimension:
        raise InvariantViolation("e·r/e·h does not have the dimension of the simple module")
    return CoverResult(target, (e,), ((e,),), kernel)


def _independent_elements(module: DecomposedModule, elements: Sequence[EndoElement]) -> List[EndoElement]:
    vectors = [x.coefficient_vector() for x in elements]
    nonzero = [i for i, v in enumerate(vectors) if any(v)]
    keep = independent_rows_mod_p([vectors[i] for i in nonzero], module.ring.prime) if nonzero else []
    return [elements[nonzero[i]] for i in keep]


def projective_cover_fg(m: FgDiscreteModule) -> CoverResult:
    """Direct sum of the covers of the simple summands of M/M·h."""
    radical = radical_of_fg_discrete(m)
    source = tuple(m.generators[i] for i in radical.simple_generators)
    images = tuple(m.embed(i, m.generators[i]) for i in radical.simple_generators)
    kernel = _cover_certificate(m, source, images)
    logger.info(f"Projective cover with {len(source)} local summands ({m.side.value} side)")
    return CoverResult(m, source, images, kernel)


def projective_cover_fg_contramodule(m: FgDiscreteModule) -> CoverResult:
    """Cover of a finitely generated contramodule ⊕ r·e_i / K.

    For finitely generated projective contramodules the module-level cover is
    the contramodule cover, so the left-side computation is authoritative.
    """
    if m.side is not Side.LEFT:
        raise InputError("Contramodule covers use left presentations")
    return projective_cover_fg(m)


def generating_subfamily(module: DecomposedModule, elements: Sequence[Sequence[EndoElement]],
                         side: Side = Side.LEFT) -> List[int]:
    """Indices of a finite subfamily generating the same submodule of r^n."""
    if not elements:
        return []
    p = module.ring.prime
    basis = elementary_basis(module)
    kept: List[int] = []
    span: List[List[int]] = []
    for index, element in enumerate(elements):
        if _contains(span, _vector(element), p):
            continue
        kept.append(index)
        span = _basis(span + [_vector([_act(x, b, side) for x in element]) for b in basis], p)
    return kept
