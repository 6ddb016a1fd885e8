import logging

import pytest

from src.semiperfect.endo_topology import (Decision, EndoElement,
                                           OpenIdealDescriptor,
                                           ResidueCertificate,
                                           SemisimpleElement,
                                           SupportGrowthCertificate,
                                           TranslatedFamily, adic_order,
                                           canonical_chain, compose,
                                           decide_invertible, dimension,
                                           elementary_basis, is_locally_split_mono,
                                           is_zero_convergent, jacobson_basis,
                                           jacobson_membership,
                                           project_to_semisimple, section_lift,
                                           section_lift_family, solve_left,
                                           solve_right)
from src.semiperfect.errors import BackendUnsupported, InputError
from src.semiperfect.matrices import PatternMatrix
from src.semiperfect.module_decomp import DecomposedModule, LocalModule

logger = logging.getLogger(__name__)


def _gap_element(module):
    ring = module.ring
    return EndoElement.from_pattern(module, PatternMatrix.single_band(ring, 1, ring.uniformizer()))


def _random_residue(module, rng):
    p = module.ring.prime
    blocks = {}
    for key, indices in module.iso_classes.items():
        blocks[key] = [[rng.randrange(p) for _ in indices] for _ in indices]
    return SemisimpleElement.from_residue_rows(module, blocks)


@pytest.mark.unit
def test_dimension_and_bases(mixed_module):
    """Test the F_p dimensions of r and of its radical for R/t + (R/t^2)^2."""
    assert dimension(mixed_module) == 13
    assert len(elementary_basis(mixed_module)) == 13
    radical = jacobson_basis(mixed_module)
    assert len(radical) == 8
    assert all(jacobson_membership(h) for h in radical)


@pytest.mark.unit
def test_compose_is_right_action(free_pair):
    """Test that compose(r, s) is the matrix product r·s."""
    r = EndoElement.from_rows(free_pair, [["1", "t"], ["0", "0"]])
    s = EndoElement.from_rows(free_pair, [["0", "0"], ["0", "1"]])
    assert compose(r, s) == EndoElement.from_rows(free_pair, [["0", "t"], ["0", "0"]])
    assert compose(s, r).is_zero()


@pytest.mark.unit
def test_compose_uses_hom_generators(mixed_module):
    """Test composition through a longer summand: R/t -> R/t^2 -> R/t is t·(1·1)."""
    up = EndoElement.matrix_unit(mixed_module, 0, 1)
    down = EndoElement.matrix_unit(mixed_module, 1, 0)
    assert (up @ down).is_zero()
    assert down @ up == EndoElement.matrix_unit(mixed_module, 1, 1, "t")


@pytest.mark.property
def test_ring_axioms_on_random_elements(mixed_module_3, random_element):
    """Test associativity, distributivity and the identity on random elements."""
    one = EndoElement.identity(mixed_module_3)
    for _ in range(30):
        a, b, c = (random_element(mixed_module_3) for _ in range(3))
        assert (a @ b) @ c == a @ (b @ c)
        assert a @ (b + c) == a @ b + a @ c
        assert (a + b) @ c == a @ c + b @ c
        assert a @ one == a == one @ a


@pytest.mark.property
def test_projection_is_ring_homomorphism(mixed_module, random_element):
    """Test that project_to_semisimple is multiplicative with kernel the radical."""
    for _ in range(200):
        a = random_element(mixed_module)
        b = random_element(mixed_module)
        assert project_to_semisimple(a @ b) == project_to_semisimple(a) @ project_to_semisimple(b)
        assert project_to_semisimple(a + b) == project_to_semisimple(a) + project_to_semisimple(b)
        assert project_to_semisimple(a).is_zero() == jacobson_membership(a)


@pytest.mark.property
def test_section_lift_is_right_inverse(mixed_module_3, rng):
    """Test project_to_semisimple(section_lift(s)) = s for random residues."""
    for _ in range(200):
        s = _random_residue(mixed_module_3, rng)
        assert project_to_semisimple(section_lift(s)) == s


@pytest.mark.property
def test_adic_order_is_super_multiplicative(mixed_module, random_element):
    """Test ord(a·b) >= ord(a) + ord(b)."""
    radical = jacobson_basis(mixed_module)
    for _ in range(50):
        a = random_element(mixed_module)
        b = random_element(mixed_module)
        assert adic_order(a @ b) >= adic_order(a) + adic_order(b)
    for h in radical:
        for k in radical:
            assert adic_order(h @ k) >= adic_order(h) + adic_order(k)


@pytest.mark.unit
def test_solve_right_and_left(free_pair, random_element):
    """Test the linear systems a·x = b and x·a = b."""
    for _ in range(20):
        a = random_element(free_pair)
        x = random_element(free_pair)
        b = a @ x
        found = solve_right(a, b)
        assert found is not None and a @ found == b
        c = x @ a
        found = solve_left(a, c)
        assert found is not None and found @ a == c
    e11 = EndoElement.projector(free_pair, [0])
    assert solve_right(e11, EndoElement.identity(free_pair)) is None


@pytest.mark.unit
def test_decide_invertible_finite(mixed_module, random_element):
    """Test inverses of units and the residue certificate of nonunits."""
    one = EndoElement.identity(mixed_module)
    found = 0
    for _ in range(40):
        u = random_element(mixed_module)
        result = decide_invertible(u)
        if result.is_invertible:
            found += 1
            assert u @ result.inverse == one
            assert result.inverse @ u == one
        else:
            assert result.decision is Decision.NOT_INVERTIBLE
            assert isinstance(result.certificate, ResidueCertificate)
    assert found > 0
    projector = EndoElement.projector(mixed_module, [0, 1])
    result = decide_invertible(projector)
    assert result.is_not_invertible
    assert result.certificate.iso_class == str(LocalModule.torsion(2))


@pytest.mark.unit
def test_one_minus_h_support_growth(omega_module):
    """Test that 1 - h on free^omega has no row-finite inverse."""
    h = _gap_element(omega_module)
    u = EndoElement.identity(omega_module) - h
    result = decide_invertible(u, levels=8)
    assert result.is_not_invertible
    certificate = result.certificate
    assert isinstance(certificate, SupportGrowthCertificate)
    assert certificate.holds()
    assert [level.support for level in certificate.levels] == list(range(1, 9))
    top = certificate.levels[-1]
    assert top.coefficients[-1] == (7, "t^7")


@pytest.mark.unit
def test_one_minus_h_support_growth_p3(pattern_3):
    """Test the same certificate over F_3."""
    module = DecomposedModule.free_omega(pattern_3)
    u = EndoElement.identity(module) - _gap_element(module)
    result = decide_invertible(u, levels=5)
    assert result.is_not_invertible
    assert result.certificate.holds()


@pytest.mark.unit
def test_nilpotent_perturbation_is_invertible(omega_module):
    """Test that 1 - t·E_01 is inverted by 1 + t·E_01."""
    u = EndoElement.identity(omega_module) - EndoElement.matrix_unit(omega_module, 0, 1, "t")
    result = decide_invertible(u)
    assert result.is_invertible
    assert u @ result.inverse == EndoElement.identity(omega_module)


@pytest.mark.unit
def test_radical_elements_are_not_invertible(omega_module):
    """Test that h itself is reported non-invertible by its residue."""
    result = decide_invertible(_gap_element(omega_module))
    assert result.is_not_invertible
    assert isinstance(result.certificate, ResidueCertificate)
    assert jacobson_membership(_gap_element(omega_module))


@pytest.mark.unit
def test_one_minus_h_is_locally_split(omega_module):
    """Test that 1 - h restricted to b_0..b_k has a splitting for every k."""
    u = EndoElement.identity(omega_module) - _gap_element(omega_module)
    for k in range(6):
        g = is_locally_split_mono(u, range(k + 1))
        assert g is not False
        projector = EndoElement.projector(omega_module, range(k + 1))
        assert projector @ u @ g == projector


@pytest.mark.unit
def test_locally_split_mono_finite(free_pair):
    """Test the finite case: units split, t·1 does not."""
    one = EndoElement.identity(free_pair)
    g = is_locally_split_mono(one, [0])
    projector = EndoElement.projector(free_pair, [0])
    assert g is not False and projector @ one @ g == projector
    assert is_locally_split_mono(one.scale("t"), [0]) is False


@pytest.mark.unit
def test_open_ideals(free_pair, omega_module):
    """Test membership in ann(E) and the canonical chain."""
    chain = canonical_chain(free_pair)
    assert [sorted(ideal.generators) for ideal in chain] == [[0], [0, 1]]
    e22 = EndoElement.projector(free_pair, [1])
    assert chain[0].contains(e22)
    assert not chain[1].contains(e22)
    omega_chain = canonical_chain(omega_module, 4)
    assert len(omega_chain) == 4
    assert omega_chain[3].contains(EndoElement.matrix_unit(omega_module, 4, 0))
    with pytest.raises(InputError):
        canonical_chain(omega_module)
    with pytest.raises(InputError):
        OpenIdealDescriptor(free_pair, frozenset({2}))


@pytest.mark.unit
def test_translated_family_convergence(omega_module, pattern_2):
    """Test zero-convergence of translated families."""
    one = pattern_2.one()
    projectors = TranslatedFamily(omega_module, ((0, 0, one),))
    assert is_zero_convergent(projectors)
    assert is_zero_convergent(projectors, canonical_chain(omega_module, 5))
    assert projectors.members_touching([0, 1, 2]) == [0, 1, 2]
    assert projectors.pattern_sum() == PatternMatrix.identity(pattern_2)
    stuck = TranslatedFamily(omega_module, ((0, 0, one),), 0, PatternMatrix.from_sparse(pattern_2, [(0, 0, one)]))
    assert not is_zero_convergent(stuck)
    assert stuck.members_touching([0]) is None
    assert is_zero_convergent([EndoElement.identity(omega_module)])


@pytest.mark.unit
def test_section_lift_family_keeps_positions(omega_module):
    """Test that lifting a translated family keeps its template."""
    residue_module = project_to_semisimple(EndoElement.identity(omega_module)).components[0][1].module
    residues = TranslatedFamily(residue_module, ((0, 0, residue_module.ring.one()),))
    lifted = section_lift_family(residues, omega_module)
    assert lifted.module == omega_module
    assert lifted.member(3) == EndoElement.matrix_unit(omega_module, 3, 3)


@pytest.mark.unit
def test_transpose_needs_uniform_module(free_pair, mixed_module):
    """Test the transpose anti-automorphism on a uniform module."""
    r = EndoElement.from_rows(free_pair, [["1", "t"], ["0", "t^2"]])
    s = EndoElement.from_rows(free_pair, [["t", "0"], ["1", "1"]])
    assert (r @ s).transpose() == s.transpose() @ r.transpose()
    with pytest.raises(BackendUnsupported):
        EndoElement.identity(mixed_module).transpose()


@pytest.mark.unit
def test_coefficient_vectors(mixed_module, random_element):
    """Test coordinates over F_p."""
    x = random_element(mixed_module)
    assert EndoElement.from_vector(mixed_module, x.coefficient_vector()) == x
    with pytest.raises(InputError):
        EndoElement.from_vector(mixed_module, [0] * 3)
