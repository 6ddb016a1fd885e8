import logging

import pytest

from src.semiperfect.adic_core import INFINITY, RingDescriptor
from src.semiperfect.duality import projector_duality_holds
from src.semiperfect.endo_topology import (EndoElement, SemisimpleElement,
                                           SupportGrowthCertificate,
                                           TranslatedFamily, canonical_chain,
                                           project_to_semisimple, section_lift,
                                           solve_right)
from src.semiperfect.errors import (BackendUnsupported, InputError,
                                    NonInvertibleSum, NotOrthogonalResidues,
                                    NotPrimitiveResidue, ResidueNotIdempotent)
from src.semiperfect.idempotent_calculus import (IdempotentFamily,
                                                 IdempotentKind,
                                                 certify_semiperfect,
                                                 classify_idempotent,
                                                 family_sum,
                                                 hensel_lift_idempotent,
                                                 hensel_lift_with_trace,
                                                 lift_convergent_family,
                                                 lift_primitive_family,
                                                 newton_step_bound,
                                                 orthogonalize_finite_family,
                                                 push_family_through_quotient,
                                                 split_idempotent,
                                                 validate_family)
from src.semiperfect.linalg import inverse_mod_p, matmul_mod_p
from src.semiperfect.matrices import PatternMatrix
from src.semiperfect.module_decomp import DecomposedModule, LocalModule
from src.semiperfect.scenarios import bad_lifting_family

logger = logging.getLogger(__name__)


def _rows(module, entries):
    return EndoElement.from_rows(module, entries)


def _random_residue_idempotent(n, p, rng):
    """P^-1·D·P with D a random 0/1 diagonal and P a random invertible matrix."""
    while True:
        P = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
        P_inv = inverse_mod_p(P, p)
        if P_inv is not None:
            break
    D = [[rng.randrange(2) if i == j else 0 for j in range(n)] for i in range(n)]
    return matmul_mod_p(matmul_mod_p(P_inv, D, p), P, p)


@pytest.mark.unit
def test_classify_examples(ring_2_2, ring_2_4, free_pair):
    """Test the three classification outcomes."""
    module = DecomposedModule.of_torsion(ring_2_2, [2, 2])
    assert classify_idempotent(EndoElement.diagonal(module, [1, 0])) is IdempotentKind.LOCAL_IDEMPOTENT
    assert classify_idempotent(EndoElement.identity(module)) is IdempotentKind.IDEMPOTENT
    assert classify_idempotent(EndoElement.zero(module)) is IdempotentKind.IDEMPOTENT
    seed = _rows(free_pair, [["1", "t"], ["t", "t^2"]])
    assert classify_idempotent(seed) is IdempotentKind.NOT_IDEMPOTENT


@pytest.mark.unit
def test_hensel_worked_example(free_pair):
    """Test the one-step lift of [[1, t], [t, t^2]] over F_2[t]/(t^4)."""
    seed = _rows(free_pair, [["1", "t"], ["t", "t^2"]])
    trace = hensel_lift_with_trace(seed)
    assert trace.result == _rows(free_pair, [["1 + t^2", "t + t^3"], ["t + t^3", "t^2"]])
    assert trace.steps == 1
    assert trace.defect_orders == (2, INFINITY)
    assert trace.result @ trace.result == trace.result


@pytest.mark.unit
def test_hensel_fixed_points(free_pair):
    """Test that idempotent seeds are returned unchanged."""
    for entries in ([["1", "1"], ["0", "0"]], [["1", "t"], ["0", "0"]], [["0", "0"], ["0", "0"]]):
        seed = _rows(free_pair, entries)
        trace = hensel_lift_with_trace(seed)
        assert trace.result == seed
        assert trace.steps == 0


@pytest.mark.unit
def test_hensel_rejects_non_idempotent_residue(free_pair):
    """Test ResidueNotIdempotent when the residue is not idempotent."""
    with pytest.raises(ResidueNotIdempotent):
        hensel_lift_idempotent(_rows(free_pair, [["1", "1"], ["1", "0"]]))


@pytest.mark.unit
def test_hensel_rejects_pattern_modules(omega_module):
    """Test that lifting is offered for finite modules only."""
    with pytest.raises(BackendUnsupported):
        hensel_lift_idempotent(EndoElement.identity(omega_module))


@pytest.mark.property
@pytest.mark.parametrize("lengths", [[8, 8], [8, 8, 8], [3, 3, 3]])
def test_hensel_random_seeds_over_precision_8(ring_2_8, rng, random_element, lengths):
    """Test quadratic convergence within the step bound on random seeds modulo t^8."""
    module = DecomposedModule.of_torsion(ring_2_8, lengths)
    assert newton_step_bound(module) == 4
    key = LocalModule.torsion(lengths[0])
    for _ in range(35):
        g = SemisimpleElement.from_residue_rows(module, {key: _random_residue_idempotent(len(lengths), 2, rng)})
        radical_part = random_element(module).scale("t")
        seed = section_lift(g) + radical_part
        trace = hensel_lift_with_trace(seed)
        e = trace.result
        assert e @ e == e
        assert project_to_semisimple(e) == g
        assert trace.steps <= 4
        finite = [order for order in trace.defect_orders if order != INFINITY]
        assert all(later >= 2 * earlier for earlier, later in zip(finite, finite[1:]))


@pytest.mark.property
def test_hensel_over_f3(ring_3_3, rng, random_element):
    """Test the uniform Newton formula in odd characteristic."""
    module = DecomposedModule.of_torsion(ring_3_3, [3, 3])
    key = LocalModule.torsion(3)
    for _ in range(20):
        g = SemisimpleElement.from_residue_rows(module, {key: _random_residue_idempotent(2, 3, rng)})
        seed = section_lift(g) + random_element(module).scale("t")
        e = hensel_lift_idempotent(seed)
        assert e @ e == e
        assert project_to_semisimple(e) == g


@pytest.mark.unit
def test_lift_primitive_family_worked_example(free_pair):
    """Test the corner lift of {[[1, t], [0, 0]], [[0, 0], [0, 1]]}."""
    f1 = _rows(free_pair, [["1", "t"], ["0", "0"]])
    f2 = _rows(free_pair, [["0", "0"], ["0", "1"]])
    family = lift_primitive_family([f1, f2])
    assert family.members == (EndoElement.projector(free_pair, [0]), EndoElement.projector(free_pair, [1]))
    assert family.complete
    for target, member, witness in zip([f1, f2], family.members, family.witnesses):
        assert target @ witness == member
        assert project_to_semisimple(member) == project_to_semisimple(target)
    assert validate_family(family).passes(require_complete=True)


@pytest.mark.unit
def test_lift_primitive_family_keeps_orthogonal_local_family(free_pair):
    """Test that an orthogonal local family is returned unchanged."""
    e1 = _rows(free_pair, [["1", "t"], ["0", "0"]])
    e2 = _rows(free_pair, [["0", "t"], ["0", "1"]])
    family = lift_primitive_family([e1, e2])
    assert family.members == (e1, e2)


@pytest.mark.unit
def test_lift_primitive_family_errors(free_pair, mixed_module):
    """Test NotPrimitiveResidue and NotOrthogonalResidues."""
    with pytest.raises(NotPrimitiveResidue):
        lift_primitive_family([_rows(free_pair, [["t", "0"], ["0", "0"]])])
    with pytest.raises(NotPrimitiveResidue):
        lift_primitive_family([EndoElement.identity(free_pair)])
    e = EndoElement.projector(free_pair, [0])
    with pytest.raises(NotOrthogonalResidues):
        lift_primitive_family([e, _rows(free_pair, [["1", "0"], ["1", "0"]])])
    with pytest.raises(InputError):
        lift_primitive_family([])


@pytest.mark.unit
def test_lift_primitive_family_mixed_module(mixed_module):
    """Test lifting residues of different iso classes."""
    targets = [EndoElement.projector(mixed_module, [0]),
               EndoElement.from_rows(mixed_module, [[0, 0, 0], [0, 1, 1], [0, 0, 0]]),
               EndoElement.from_rows(mixed_module, [[0, "1", 0], [0, 0, 1], [0, 0, 1]])]
    family = lift_primitive_family(targets)
    assert len(family.members) == 3
    assert family.complete
    for target, member in zip(targets, family.members):
        assert solve_right(target, member) is not None


@pytest.mark.unit
def test_orthogonalize_worked_example(free_pair):
    """Test sequential corner lifting of {[[1, t], [0, 0]], [[0, 0], [0, 1]]}."""
    f1 = _rows(free_pair, [["1", "t"], ["0", "0"]])
    f2 = _rows(free_pair, [["0", "0"], ["0", "1"]])
    family = orthogonalize_finite_family([f1, f2])
    assert family.members == (f1, _rows(free_pair, [["0", "t"], ["0", "1"]]))
    assert family.complete
    assert family_sum(family) == EndoElement.identity(free_pair)


@pytest.mark.unit
def test_orthogonalize_keeps_orthogonal_family(free_pair):
    """Test that an already orthogonal family comes back unchanged."""
    members = [EndoElement.projector(free_pair, [0]), EndoElement.projector(free_pair, [1])]
    family = orthogonalize_finite_family(members)
    assert list(family.members) == members
    assert family.complete


@pytest.mark.unit
def test_orthogonalize_rejects_non_radical_products(free_pair):
    """Test that members with a unit cross product are rejected."""
    e = EndoElement.projector(free_pair, [0])
    f = _rows(free_pair, [["0", "0"], ["1", "1"]])
    with pytest.raises(NotOrthogonalResidues):
        orthogonalize_finite_family([e, f])


@pytest.mark.unit
@pytest.mark.parametrize("prime", [2, 3])
def test_orthogonalize_bad_lifting_is_obstructed(prime):
    """Test that E_mm - t·E_m,m+1 cannot be orthogonalized: its sum is 1 - h."""
    module = DecomposedModule.free_omega(RingDescriptor.pattern(prime))
    family = bad_lifting_family(module)
    t = module.ring.uniformizer()
    h = EndoElement.from_pattern(module, PatternMatrix.single_band(module.ring, 1, t))
    assert family_sum(family) == EndoElement.identity(module) - h
    with pytest.raises(NonInvertibleSum) as excinfo:
        orthogonalize_finite_family(family, levels=6)
    certificate = excinfo.value.certificate
    assert isinstance(certificate, SupportGrowthCertificate)
    assert certificate.holds()
    assert certificate.entry == str(t)


@pytest.mark.unit
def test_split_identity(ring_2_2):
    """Test splitting the identity of (R/t^2)^2 into two local idempotents."""
    module = DecomposedModule.of_torsion(ring_2_2, [2, 2])
    result = split_idempotent(EndoElement.identity(module))
    family = result.family
    assert len(family.members) == 2
    assert family.complete
    assert family_sum(family) == EndoElement.identity(module)
    assert all(classify_idempotent(e) is IdempotentKind.LOCAL_IDEMPOTENT for e in family.members)
    for k, remainder in result.remainders:
        assert remainder.rows_vanish(range(k + 1))


@pytest.mark.unit
def test_split_local_idempotent(free_pair):
    """Test that a local idempotent splits into itself."""
    e = EndoElement.projector(free_pair, [0])
    family = split_idempotent(e).family
    assert family.members == (e,)
    assert not family.complete


@pytest.mark.unit
def test_split_random_idempotents(mixed_module_3, rng):
    """Test that residues of the pieces decompose the residue of e."""
    module = mixed_module_3
    for _ in range(10):
        blocks = {key: _random_residue_idempotent(len(indices), 3, rng)
                  for key, indices in module.iso_classes.items()}
        e = hensel_lift_idempotent(section_lift(SemisimpleElement.from_residue_rows(module, blocks)))
        result = split_idempotent(e)
        assert family_sum(result.family) == e
        assert sum(project_to_semisimple(m).rank() for m in result.family.members) == \
            project_to_semisimple(e).rank()
        for k, remainder in result.remainders:
            assert canonical_chain(module)[k].contains(remainder)


@pytest.mark.unit
def test_split_rejects_non_idempotent(free_pair):
    """Test that only idempotents can be split."""
    with pytest.raises(InputError):
        split_idempotent(_rows(free_pair, [["1", "t"], ["t", "t^2"]]))


@pytest.mark.unit
def test_split_identity_of_free_omega(omega_module):
    """Test the countable splitting of 1 into coordinate projectors."""
    result = split_idempotent(EndoElement.identity(omega_module), depth=6)
    family = result.family
    assert family.members == ()
    assert family.tail is not None
    assert family.tail.member(5) == EndoElement.matrix_unit(omega_module, 5, 5)
    assert family.complete
    assert len(result.remainders) == 6
    for k, remainder in result.remainders:
        assert remainder.rows_vanish(range(k + 1))


@pytest.mark.unit
def test_split_rejects_banded_pattern_idempotents(omega_module):
    """Test that non-diagonal pattern idempotents are out of scope."""
    e = EndoElement.projector(omega_module, [0]) + EndoElement.matrix_unit(omega_module, 0, 1, "t")
    with pytest.raises(BackendUnsupported):
        split_idempotent(e)


@pytest.mark.unit
def test_certify_semiperfect_finite(ring_2_2, mixed_module):
    """Test the complete family of summand projectors."""
    module = DecomposedModule.of_torsion(ring_2_2, [2, 2])
    family = certify_semiperfect(module)
    assert family.members == (EndoElement.diagonal(module, [1, 0]), EndoElement.diagonal(module, [0, 1]))
    assert family.complete
    mixed = certify_semiperfect(mixed_module)
    assert len(mixed.members) == 3
    assert mixed.audit().passes(require_complete=True)


@pytest.mark.unit
def test_certify_semiperfect_free_omega(omega_module):
    """Test the countable projector family of free^omega."""
    family = certify_semiperfect(omega_module)
    audit = family.audit()
    assert audit.passes(require_complete=True)
    assert audit.zero_convergent
    assert family.size == INFINITY


@pytest.mark.unit
def test_validate_family_reports_failures(free_pair, omega_module):
    """Test that broken families fail their audit with reasons."""
    e = EndoElement.projector(free_pair, [0])
    audit = validate_family(IdempotentFamily(free_pair, (e, e), None, True))
    assert not audit.orthogonal
    assert not audit.passes(require_complete=False)
    assert any("not orthogonal" in failure for failure in audit.failures)
    ring = omega_module.ring
    stuck = TranslatedFamily(omega_module, ((0, 0, ring.one()),), 1,
                             PatternMatrix.from_sparse(ring, [(0, 0, ring.one())]))
    audit = validate_family(IdempotentFamily(omega_module, (), stuck, False))
    assert not audit.zero_convergent


@pytest.mark.unit
def test_push_family_through_quotient(ring_2_4, mixed_module):
    """Test reduction of complete families to a coarser ring."""
    family = certify_semiperfect(mixed_module)
    pushed = push_family_through_quotient(family, 2)
    assert pushed.module.ring == RingDescriptor.truncated(2, 2)
    assert len(pushed.members) == len(family.members)
    assert pushed.complete
    lifted = lift_primitive_family([_rows(DecomposedModule.of_torsion(ring_2_4, [4, 4]), [["1", "t"], ["0", "0"]]),
                                    _rows(DecomposedModule.of_torsion(ring_2_4, [4, 4]), [["0", "0"], ["0", "1"]])])
    pushed = push_family_through_quotient(lifted, 1)
    assert [s.length for s in pushed.module.summands] == [1, 1]
    assert pushed.complete
    with pytest.raises(InputError):
        push_family_through_quotient(family, 4)


@pytest.mark.unit
def test_lift_convergent_family_is_member_wise(free_pair):
    """Test that each member is lifted on its own."""
    seeds = [_rows(free_pair, [["1", "t"], ["t", "t^2"]]), EndoElement.projector(free_pair, [1])]
    lifted = lift_convergent_family(seeds)
    assert lifted[0] == hensel_lift_idempotent(seeds[0])
    assert lifted[1] == seeds[1]


@pytest.mark.property
def test_lifted_idempotents_dualize(ring_3_3, rng, random_element):
    """Test that every Hensel lift, and every piece of its splitting, gives mutually dual projectors."""
    module = DecomposedModule.of_torsion(ring_3_3, [1, 3, 3])
    for _ in range(10):
        blocks = {key: _random_residue_idempotent(len(indices), 3, rng)
                  for key, indices in module.iso_classes.items()}
        seed = section_lift(SemisimpleElement.from_residue_rows(module, blocks)) + random_element(module).scale("t")
        e = hensel_lift_idempotent(seed)
        assert projector_duality_holds(e)
        assert all(projector_duality_holds(piece) for piece in split_idempotent(e).family.members)


@pytest.mark.unit
def test_countable_families_dualize(omega_module):
    """Test the projectors of the certified and the split families of free^omega."""
    certified = certify_semiperfect(omega_module)
    split = split_idempotent(EndoElement.identity(omega_module), depth=3).family
    for family in (certified, split):
        for k in range(3):
            assert projector_duality_holds(family.tail.member(family.tail.start + k))
