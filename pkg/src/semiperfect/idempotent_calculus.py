"""
Idempotents of r = End(M)^op: classification, lifting modulo the topological
Jacobson radical, orthogonalization, countable splitting and the
semiperfectness certificate.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from .adic_core import INFINITY, RingDescriptor
from .endo_topology import (EndoElement, OpenIdealDescriptor,
                            SemisimpleElement, TranslatedFamily, adic_order,
                            canonical_chain, decide_invertible,
                            jacobson_membership, project_to_semisimple,
                            section_lift, solve_right)
from .errors import (BackendUnsupported, InputError, InvariantViolation,
                     NoConvergence, NonInvertibleSum, NotOrthogonalResidues,
                     NotPrimitiveResidue, ResidueNotIdempotent)
from .linalg import residue_matrix
from .module_decomp import DecomposedModule

logger = logging.getLogger(__name__)


class IdempotentKind(Enum):
    NOT_IDEMPOTENT = "not_idempotent"
    IDEMPOTENT = "idempotent"
    LOCAL_IDEMPOTENT = "local_idempotent"


def classify_idempotent(e: EndoElement) -> IdempotentKind:
    if e @ e != e:
        return IdempotentKind.NOT_IDEMPOTENT
    if e.is_zero():
        return IdempotentKind.IDEMPOTENT
    if project_to_semisimple(e).rank() == 1:
        return IdempotentKind.LOCAL_IDEMPOTENT
    return IdempotentKind.IDEMPOTENT


def radical_nilpotency_bound(module: DecomposedModule) -> int:
    """An n with h^n = 0 for the radical h of a finite module's endomorphism ring."""
    n = module.ring.precision
    return n if module.is_uniform else 2 ** n


def newton_step_bound(module: DecomposedModule) -> int:
    n = module.ring.precision
    if module.is_uniform:
        return math.ceil(math.log2(n)) + 1 if n > 1 else 1
    return n + 1


# -- Hensel lifting ----------------------------------------------------------

@dataclass(frozen=True)
class HenselTrace:
    seed: EndoElement
    result: EndoElement
    defect_orders: Tuple[Union[int, float], ...]

    @property
    def steps(self) -> int:
        return len(self.defect_orders) - 1


def _require_finite_truncated(module: DecomposedModule, operation: str) -> None:
    if module.is_countable or not module.ring.is_truncated:
        raise BackendUnsupported(f"{operation} needs a finite module over a truncated ring")


def hensel_lift_with_trace(seed: EndoElement) -> HenselTrace:
    """Newton iteration e <- 3e^2 - 2e^3 with per-step defect orders."""
    module = seed.module
    _require_finite_truncated(module, "Hensel lifting")
    if not project_to_semisimple(seed).is_idempotent():
        raise ResidueNotIdempotent(f"Residue of {seed} is not idempotent")
    bound = newton_step_bound(module)
    e = seed
    square = e @ e
    defect = square - e
    orders = [adic_order(defect)]
    while not defect.is_zero():
        if len(orders) > bound:
            raise NoConvergence(f"Newton iteration exceeded {bound} steps over {module.label}")
        e = square.scale(3) - (square @ e).scale(2)
        square = e @ e
        defect = square - e
        order = adic_order(defect)
        previous = orders[-1]
        if order != INFINITY and order < 2 * previous:
            raise NoConvergence(f"Defect order went from {previous} to {order}; expected doubling")
        orders.append(order)
        logger.debug(f"Newton step {len(orders) - 1}: defect order {order}")
    return HenselTrace(seed, e, tuple(orders))


def hensel_lift_idempotent(seed: EndoElement) -> EndoElement:
    return hensel_lift_with_trace(seed).result


def lift_convergent_family(targets: Sequence[EndoElement]) -> List[EndoElement]:
    """Lift each member separately; the lifts need not be orthogonal."""
    return [hensel_lift_idempotent(target) for target in targets]


# -- families ----------------------------------------------------------------

@dataclass(frozen=True)
class FamilyAudit:
    idempotent: bool
    orthogonal: bool
    zero_convergent: bool
    complete: bool
    local: bool
    failures: Tuple[str, ...] = ()

    def passes(self, require_complete: bool) -> bool:
        return (self.idempotent and self.orthogonal and self.zero_convergent and self.local
                and (self.complete or not require_complete))


@dataclass(frozen=True)
class IdempotentFamily:
    """Finite members followed by an optional translated countable tail.

    ``witnesses`` holds, when the family was lifted from targets f_w, elements
    x_w with compose(f_w, x_w) = member_w.
    """
    module: DecomposedModule
    members: Tuple[EndoElement, ...] = ()
    tail: Optional[TranslatedFamily] = None
    complete: bool = False
    witnesses: Tuple[EndoElement, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        for member in self.members:
            if member.module != self.module:
                raise InputError("Family members must share the module")
        if self.tail is not None and self.tail.module != self.module:
            raise InputError("Family tail must share the module")

    @property
    def size(self) -> Union[int, float]:
        return INFINITY if self.tail is not None else len(self.members)

    @property
    def is_finite(self) -> bool:
        return self.tail is None

    def audit(self, max_workers: int = 4) -> FamilyAudit:
        return validate_family(self, max_workers)


def family_sum(family: IdempotentFamily) -> EndoElement:
    total = EndoElement.zero(family.module)
    for member in family.members:
        total = total + member
    if family.tail is not None:
        total = total + EndoElement(family.module, family.tail.pattern_sum())
    return total


def _head_bound(member: EndoElement, tail: TranslatedFamily) -> int:
    offsets = [abs(d) for d in member.body.offsets] if member.is_pattern else []
    regular = member.body.regular_from if member.is_pattern else 0
    return tail.start + regular + max(offsets, default=0) + 2 * tail.span + 2


def _representative_pairs(family: IdempotentFamily) -> Iterator[Tuple[str, EndoElement, EndoElement]]:
    """Pairs (x, y) of distinct members covering every product class x·y."""
    head = family.members
    for a, x in enumerate(head):
        for b, y in enumerate(head):
            if a != b:
                yield f"members {a},{b}", x, y
    tail = family.tail
    if tail is None:
        return
    for a, x in enumerate(head):
        for m in range(tail.start, _head_bound(x, tail) + 1):
            y = tail.member(m)
            yield f"member {a}, tail {m}", x, y
            yield f"tail {m}, member {a}", y, x
    for shift in tail.interaction_shifts:
        if shift == 0:
            continue
        m = tail.start + max(0, -shift)
        yield f"tail {m},{m + shift}", tail.member(m), tail.member(m + shift)


def _row_local_complete(family: IdempotentFamily) -> bool:
    """For every row, the members touching it sum to the identity on it."""
    module = family.module
    if not module.is_countable:
        return family_sum(family) == EndoElement.identity(module)
    tail = family.tail
    if tail is not None and tail.constant is not None:
        return False
    limits = [m.body.regular_from for m in family.members]
    if tail is not None:
        limits.append(tail.start + max(tail.row_offsets, default=0))
    horizon = max(limits, default=0) + (tail.span if tail else 0) + 2
    total = EndoElement.zero(module)
    for member in family.members:
        total = total + member
    if tail is not None:
        for m in tail.members_touching(range(horizon + 1)) or []:
            total = total + tail.member(m)
    one = module.ring.one()
    return all(total.row(j) == [(j, one)] for j in range(horizon + 1))


def _representatives(family: IdempotentFamily) -> List[Tuple[str, EndoElement]]:
    items = [(f"member {a}", m) for a, m in enumerate(family.members)]
    if family.tail is not None:
        items.append((f"tail {family.tail.start}", family.tail.member(family.tail.start)))
    return items


def validate_family(family: IdempotentFamily, max_workers: int = 4) -> FamilyAudit:
    """Check every IdempotentFamily invariant exactly; members are fanned out."""
    failures: List[str] = []
    representatives = _representatives(family)
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        kinds = list(executor.map(lambda item: classify_idempotent(item[1]), representatives))
        pairs = list(_representative_pairs(family))
        products = list(executor.map(lambda pair: (pair[1] @ pair[2]).is_zero(), pairs))
    idempotent = True
    local = True
    for (label, _), kind in zip(representatives, kinds):
        if kind is IdempotentKind.NOT_IDEMPOTENT:
            idempotent = False
            failures.append(f"{label} is not idempotent")
        if kind is not IdempotentKind.LOCAL_IDEMPOTENT:
            local = False
            failures.append(f"{label} is not a local idempotent")
    orthogonal = all(products)
    failures.extend(f"{label} not orthogonal" for (label, _, _), zero in zip(pairs, products) if not zero)
    zero_convergent = family.tail is None or family.tail.constant is None
    if not zero_convergent:
        failures.append("tail has a constant part")
    complete = _row_local_complete(family) if zero_convergent else False
    if family.complete and not complete:
        failures.append("family claims completeness but does not sum to 1")
    return FamilyAudit(idempotent, orthogonal, zero_convergent, complete, local, tuple(failures))


def _checked(family: IdempotentFamily, max_workers: int = 4) -> IdempotentFamily:
    audit = validate_family(family, max_workers)
    if not audit.passes(require_complete=family.complete):
        raise InvariantViolation("; ".join(audit.failures))
    return family


# -- lifting and orthogonalization -------------------------------------------

def _check_primitive_residues(targets: Sequence[EndoElement]) -> List[SemisimpleElement]:
    residues = [project_to_semisimple(f) for f in targets]
    for index, g in enumerate(residues):
        if not g.is_idempotent() or g.rank() != 1:
            raise NotPrimitiveResidue(f"Residue of target {index} is not a primitive idempotent")
    for a, g in enumerate(residues):
        for b, h in enumerate(residues):
            if a != b and not (g @ h).is_zero():
                raise NotOrthogonalResidues(f"Residues of targets {a} and {b} are not orthogonal")
    return residues


def lift_primitive_family(targets: Sequence[EndoElement]) -> IdempotentFamily:
    """Orthogonal local idempotents e'_w in f'_w·r with the residues of the targets.

    With eps_w the Newton lift of f'_w, the Gram-type matrix (eps_w eps_v) is
    invertible over the corner rings; e'_w = Σ_v (G^-1)_{wv} eps_v, where
    G^-1 = Σ_k (1 - G)^k terminates because 1 - G has radical entries.
    """
    if not targets:
        raise InputError("No targets to lift")
    module = targets[0].module
    _require_finite_truncated(module, "Primitive family lifting")
    _check_primitive_residues(targets)
    eps = [hensel_lift_idempotent(f) for f in targets]
    zero = EndoElement.zero(module)
    gram = [[eps[w] @ eps[v] if w != v else zero for v in range(len(eps))] for w in range(len(eps))]
    y = list(eps)
    z = list(eps)
    bound = radical_nilpotency_bound(module) + 1
    rounds = 0
    while any(not term.is_zero() for term in y):
        if rounds > bound:
            raise NoConvergence("Gram correction did not terminate")
        y = [_neg_sum((gram[w][v] @ y[v] for v in range(len(y)) if v != w), zero) for w in range(len(y))]
        z = [a + b for a, b in zip(z, y)]
        rounds += 1
    witnesses = []
    for index, (target, member) in enumerate(zip(targets, z)):
        witness = solve_right(target, member)
        if witness is None:
            raise InvariantViolation(f"Lifted member {index} is not in target_{index}·r")
        witnesses.append(witness)
    family = IdempotentFamily(module, tuple(z), None, False, tuple(witnesses))
    family = IdempotentFamily(module, family.members, None, _row_local_complete(family), tuple(witnesses))
    logger.debug(f"Lifted {len(z)} primitive residues after {rounds} correction rounds")
    return _checked(family)


def _neg_sum(terms, zero: EndoElement) -> EndoElement:
    total = zero
    for term in terms:
        total = total + term
    return -total


def orthogonalize_finite_family(family: Union[Sequence[EndoElement], IdempotentFamily],
                                levels: int = 8, max_workers: int = 4) -> IdempotentFamily:
    """Replace local idempotents with radical products by orthogonal ones.

    When the residues are complete the sum must be invertible first; a
    non-invertible sum is reported as NonInvertibleSum with its certificate.
    """
    if isinstance(family, IdempotentFamily):
        source = family
    else:
        members = tuple(family)
        if not members:
            raise InputError("Empty family")
        source = IdempotentFamily(members[0].module, members)
    module = source.module
    for label, member in _representatives(source):
        if classify_idempotent(member) is not IdempotentKind.LOCAL_IDEMPOTENT:
            raise NotPrimitiveResidue(f"{label} is not a local idempotent")
    pairs = list(_representative_pairs(source))
    products = [x @ y for _, x, y in pairs]
    for (label, _, _), product in zip(pairs, products):
        if not jacobson_membership(product):
            raise NotOrthogonalResidues(f"Product of {label} is not in the radical")
    if all(product.is_zero() for product in products):
        return IdempotentFamily(module, source.members, source.tail, _row_local_complete(source))

    total = family_sum(source)
    residues_complete = project_to_semisimple(total) == SemisimpleElement.identity(module)
    if residues_complete:
        verdict = decide_invertible(total, levels=levels, max_workers=max_workers)
        if verdict.is_not_invertible:
            logger.info("Family sum is not invertible; orthogonalization is obstructed")
            raise NonInvertibleSum("The sum of the family is not invertible", verdict.certificate)
    if module.is_countable or source.tail is not None:
        raise BackendUnsupported("Orthogonalization of countable families is not supported")

    identity = EndoElement.identity(module)
    accumulated = EndoElement.zero(module)
    lifted = []
    for member in source.members:
        corner = identity - accumulated
        e = hensel_lift_idempotent(corner @ member @ corner)
        lifted.append(e)
        accumulated = accumulated + e
    result = IdempotentFamily(module, tuple(lifted), None, accumulated == identity)
    return _checked(result, max_workers)


# -- splitting ---------------------------------------------------------------

@dataclass(frozen=True)
class SplitResult:
    family: IdempotentFamily
    remainders: Tuple[Tuple[int, EndoElement], ...]


def _rank_one_piece(g: SemisimpleElement, preferred: Sequence[int]) -> SemisimpleElement:
    """A rank-one idempotent p with p = g·p·g, taken from a row of g."""
    module = g.module
    p = module.ring.prime
    preferred = set(preferred)
    candidates = []
    for key, value in g.components:
        indices = module.iso_classes[key]
        rows = residue_matrix(value.body.to_lists())
        for a, row in enumerate(rows):
            if any(row):
                candidates.append((indices[a] not in preferred, indices[a], key, a, rows))
    if not candidates:
        raise InvariantViolation("Nonzero idempotent with zero residue")
    _, _, key, a, rows = min(candidates, key=lambda c: (c[0], c[1]))
    row = rows[a]
    pivot = next(i for i, x in enumerate(row) if x)
    scale = pow(row[pivot], -1, p)
    column = [r[pivot] for r in rows]
    piece = [[(column[b] * row[c] * scale) % p for c in range(len(row))] for b in range(len(rows))]
    return SemisimpleElement.from_residue_rows(module, {key: piece})


def split_idempotent(e: EndoElement, chain: Optional[Sequence[OpenIdealDescriptor]] = None,
                     depth: int = 8) -> SplitResult:
    """Write e as a sum of orthogonal local idempotents along a chain of open ideals."""
    if e @ e != e:
        raise InputError("Only idempotents can be split")
    if e.is_pattern:
        return _split_pattern(e, chain, depth)
    module = e.module
    _require_finite_truncated(module, "Splitting")
    chain = list(chain) if chain is not None else canonical_chain(module)
    remainder = e
    members: List[EndoElement] = []
    remainders: List[Tuple[int, EndoElement]] = []

    def peel(preferred: Sequence[int]) -> None:
        nonlocal remainder
        piece = _rank_one_piece(project_to_semisimple(remainder), preferred)
        lifted = hensel_lift_idempotent(remainder @ section_lift(piece) @ remainder)
        members.append(lifted)
        remainder = remainder - lifted

    for k, ideal in enumerate(chain):
        while not ideal.contains(remainder):
            peel(sorted(ideal.generators))
        remainders.append((k, remainder))
        logger.debug(f"Split step {k}: {len(members)} local idempotents peeled")
    while not remainder.is_zero():
        peel(())
    family = IdempotentFamily(module, tuple(members), None, e == EndoElement.identity(module))
    return SplitResult(_checked(family), tuple(remainders))


def _split_pattern(e: EndoElement, chain: Optional[Sequence[OpenIdealDescriptor]], depth: int) -> SplitResult:
    module = e.module
    body = e.body
    one = module.ring.one()
    diagonal = all(b.offset == 0 for b in body.bands) and all(j == i for j, i, _ in body.sparse)
    values = [b.entry for b in body.bands] + [v for _, _, v in body.sparse]
    if not diagonal or any(v != one for v in values):
        raise BackendUnsupported("Only diagonal 0/1 idempotents of free^omega can be split")
    head = [j for j, _, _ in body.sparse]
    band = body.bands[0] if body.bands else None
    members = tuple(EndoElement.matrix_unit(module, j, j) for j in head)
    tail = TranslatedFamily(module, ((0, 0, one),), band.start) if band is not None else None
    family = IdempotentFamily(module, members, tail, e == EndoElement.identity(module))
    chain = list(chain) if chain is not None else canonical_chain(module, depth)
    remainders = []
    for k, ideal in enumerate(chain):
        limit = max(ideal.generators, default=-1)
        peeled = [j for j in range(limit + 1) if e.entry(j, j) == one]
        remainder = e - EndoElement.projector(module, peeled)
        if not ideal.contains(remainder):
            raise InvariantViolation(f"Remainder {k} is not in the open ideal of the chain")
        remainders.append((k, remainder))
    return SplitResult(_checked(family), tuple(remainders))


# -- certificate and pushforward ----------------------------------------------

def certify_semiperfect(module: DecomposedModule, max_workers: int = 4) -> IdempotentFamily:
    """The complete family of summand projectors, validated."""
    if module.is_countable:
        tail = TranslatedFamily(module, ((0, 0, module.ring.one()),), 0)
        family = IdempotentFamily(module, (), tail, True)
    else:
        members = tuple(EndoElement.projector(module, [j]) for j in range(len(module.summands)))
        family = IdempotentFamily(module, members, None, True)
    logger.info(f"Certifying semiperfectness of {module.label}")
    return _checked(family, max_workers)


def push_family_through_quotient(family: IdempotentFamily, target_precision: int) -> IdempotentFamily:
    """Image of the family under reduction modulo t^target_precision."""
    module = family.module
    _require_finite_truncated(module, "Pushforward")
    if family.tail is not None:
        raise BackendUnsupported("Pushforward of countable families is not supported")
    if not 1 <= target_precision < module.ring.precision:
        raise InputError(f"Target precision must lie in 1..{module.ring.precision - 1}")
    ring = RingDescriptor.truncated(module.ring.prime, target_precision)
    target = DecomposedModule.of_torsion(ring, [min(s.length, target_precision) for s in module.summands])
    t = module.ring.uniformizer()
    n = len(module.summands)
    images = []
    for member in family.members:
        rows = [[(member.entry(j, i) * t ** (module.exponent(j, i) - target.exponent(j, i))).reduce_to(ring)
                 for i in range(n)] for j in range(n)]
        image = EndoElement.from_rows(target, rows)
        if not image.is_zero():
            images.append(image)
    pushed = IdempotentFamily(target, tuple(images))
    pushed = IdempotentFamily(target, pushed.members, None, _row_local_complete(pushed))
    logger.debug(f"Pushed {len(family.members)} members to {target.label}; {len(images)} survive")
    return _checked(pushed)
