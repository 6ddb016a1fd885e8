import logging
from dataclasses import replace

import pytest

from src.semiperfect.adic_core import RingDescriptor
from src.semiperfect.covers import (FgDiscreteModule, Side,
                                    generating_subfamily, projective_cover_fg,
                                    projective_cover_fg_contramodule,
                                    projective_cover_simple,
                                    radical_of_fg_discrete,
                                    relation_component, relation_values)
from src.semiperfect.endo_topology import EndoElement, SemisimpleElement
from src.semiperfect.errors import (BackendUnsupported, InputError,
                                    NotPrimitiveResidue)
from src.semiperfect.module_decomp import DecomposedModule, LocalModule

logger = logging.getLogger(__name__)

pytestmark = pytest.mark.unit


@pytest.fixture(scope="module")
def module_1_2():
    """R/t + R/t^2 over F_2[t]/(t^3)."""
    return DecomposedModule.of_torsion(RingDescriptor.truncated(2, 3), [1, 2])


def test_free_module_is_its_own_cover(module_1_2):
    """Test that e_0·r + e_1·r has radical quotient of two simples and a trivial kernel."""
    e0 = EndoElement.projector(module_1_2, [0])
    e1 = EndoElement.projector(module_1_2, [1])
    m = FgDiscreteModule(module_1_2, (e0, e1))
    radical = radical_of_fg_discrete(m)
    assert radical.simple_generators == (0, 1)
    assert radical.simple_dimensions == (1, 1)
    assert radical.quotient_dimension == 2
    assert radical.is_semisimple_quotient
    cover = projective_cover_fg(m)
    assert cover.kernel_span == ()
    assert cover.verify()


def test_identified_generators(module_1_2):
    """Test that a relation identifying two copies of e_0·r leaves one simple summand."""
    e0 = EndoElement.projector(module_1_2, [0])
    m = FgDiscreteModule(module_1_2, (e0, e0), ((e0, e0),))
    radical = radical_of_fg_discrete(m)
    assert radical.simple_generators == (0,)
    assert radical.quotient_dimension == 1
    assert radical.relation_dimension == 2
    cover = projective_cover_fg(m)
    assert cover.source == (e0,)
    assert cover.kernel_span == ()
    assert cover.verify()


def test_cover_of_simple_module(module_1_2):
    """Test e·r -> e·r/e·h for the primitive residue of the R/t^2 class."""
    g = SemisimpleElement.from_residue_rows(module_1_2, {LocalModule.torsion(2): [[1]]})
    cover = projective_cover_simple(module_1_2, g)
    assert cover.source == (EndoElement.projector(module_1_2, [1]),)
    assert len(cover.target.relations) == 2
    assert len(cover.kernel_span) == 2
    assert cover.verify()
    assert radical_of_fg_discrete(cover.target).radical_dimension == 0


def test_cover_of_simple_module_uniform(ring_2_2):
    """Test the simple module of (R/t^2)^2, of dimension 2 over F_2."""
    module = DecomposedModule.of_torsion(ring_2_2, [2, 2])
    g = SemisimpleElement.from_residue_rows(module, {LocalModule.torsion(2): [[1, 1], [0, 0]]})
    cover = projective_cover_simple(module, g)
    assert cover.verify()
    quotient = radical_of_fg_discrete(cover.target)
    assert quotient.quotient_dimension == 2


def test_cover_rejects_non_primitive_residue(module_1_2):
    """Test NotPrimitiveResidue for the identity residue."""
    with pytest.raises(NotPrimitiveResidue):
        projective_cover_simple(module_1_2, SemisimpleElement.identity(module_1_2))


def test_contramodule_cover(module_1_2):
    """Test the left-side cover of r·e_0 + r·e_1 modulo a radical relation."""
    e0 = EndoElement.projector(module_1_2, [0])
    e1 = EndoElement.projector(module_1_2, [1])
    link = EndoElement.matrix_unit(module_1_2, 1, 0)
    m = FgDiscreteModule(module_1_2, (e0, e1), ((link, EndoElement.zero(module_1_2)),), Side.LEFT)
    cover = projective_cover_fg_contramodule(m)
    assert cover.side is Side.LEFT
    assert len(cover.source) == 2
    assert len(cover.kernel_span) == 1
    assert cover.verify()
    with pytest.raises(InputError):
        projective_cover_fg_contramodule(FgDiscreteModule(module_1_2, (e0,)))


def test_tampered_cover_fails_verification(module_1_2):
    """Test that a cover with forged images no longer verifies."""
    e0 = EndoElement.projector(module_1_2, [0])
    e1 = EndoElement.projector(module_1_2, [1])
    m = FgDiscreteModule(module_1_2, (e0, e1))
    cover = projective_cover_fg(m)
    forged = replace(cover, images=((EndoElement.zero(module_1_2), EndoElement.zero(module_1_2)),) * 2)
    assert not forged.verify()


def test_generators_must_be_local(module_1_2, pattern_2):
    """Test that generators are local idempotents over a truncated ring."""
    with pytest.raises(NotPrimitiveResidue):
        FgDiscreteModule(module_1_2, (EndoElement.identity(module_1_2),))
    e0 = EndoElement.projector(module_1_2, [0])
    e1 = EndoElement.projector(module_1_2, [1])
    with pytest.raises(InputError):
        FgDiscreteModule(module_1_2, (e0,), ((e1,),))
    with pytest.raises(InputError):
        FgDiscreteModule(module_1_2, (e0,), ((e0, e0),))
    omega = DecomposedModule.free_omega(pattern_2)
    with pytest.raises(BackendUnsupported):
        FgDiscreteModule(omega, ())


def test_generating_subfamily(module_1_2):
    """Test extraction of a finite generating subfamily of a left ideal."""
    e0 = EndoElement.projector(module_1_2, [0])
    e1 = EndoElement.projector(module_1_2, [1])
    one = EndoElement.identity(module_1_2)
    elements = [(e0,), (e0,), (e1,), (one,)]
    assert generating_subfamily(module_1_2, elements) == [0, 2]
    assert generating_subfamily(module_1_2, []) == []


def _random_fg_module(module, rng, random_element, side=Side.RIGHT):
    size = len(module.summands)
    generators = tuple(EndoElement.projector(module, [rng.randrange(size)]) for _ in range(rng.randint(1, 3)))
    relations = []
    for _ in range(rng.randint(0, 2)):
        if side is Side.RIGHT:
            relations.append(tuple(e @ random_element(module) for e in generators))
        else:
            relations.append(tuple(random_element(module) @ e for e in generators))
    return FgDiscreteModule(module, generators, tuple(relations), side)


@pytest.mark.property
@pytest.mark.parametrize("side", [Side.RIGHT, Side.LEFT])
def test_random_covers(module_1_2, rng, random_element, side):
    """Test the cover certificate on random presentations, and that covers of projectives are trivial."""
    module = DecomposedModule.of_torsion(module_1_2.ring, [1, 2, 3])
    for _ in range(50):
        m = _random_fg_module(module, rng, random_element, side)
        cover = projective_cover_fg(m)
        assert cover.verify()
        assert len(cover.source) == len(radical_of_fg_discrete(m).simple_generators)
        again = projective_cover_fg(cover.source_module())
        assert again.kernel_span == ()
        assert again.source == cover.source


@pytest.mark.property
def test_left_cover_mirrors_right_cover(rng, random_element):
    """Test that transposing a presentation of (R/t^3)^2 mirrors the cover dimensions."""
    module = DecomposedModule.of_torsion(RingDescriptor.truncated(2, 3), [3, 3])
    e = (EndoElement.projector(module, [0]), EndoElement.projector(module, [1]))
    for _ in range(20):
        relation = tuple(g @ random_element(module) for g in e)
        right = FgDiscreteModule(module, e, (relation,))
        left = FgDiscreteModule(module, e, (tuple(x.transpose() for x in relation),), Side.LEFT)
        right_cover = projective_cover_fg(right)
        left_cover = projective_cover_fg_contramodule(left)
        assert len(right_cover.source) == len(left_cover.source)
        assert len(right_cover.kernel_span) == len(left_cover.kernel_span)
        assert (radical_of_fg_discrete(right).quotient_dimension
                == radical_of_fg_discrete(left).quotient_dimension)


@pytest.mark.property
@pytest.mark.parametrize("side", [Side.RIGHT, Side.LEFT])
def test_relation_scalars_recover_components(rng, random_element, side):
    """Test that the pivot row (or column) of a summand element rebuilds the element."""
    module = DecomposedModule.of_torsion(RingDescriptor.truncated(3, 3), [1, 2, 3])
    for _ in range(30):
        e = EndoElement.projector(module, [rng.randrange(3)])
        x = e @ random_element(module) if side is Side.RIGHT else random_element(module) @ e
        values = relation_values(e, side, x)
        assert len(values) == 3
        assert relation_component(e, side, values) == x


def test_relation_values_reject_foreign_elements(module_1_2):
    e0 = EndoElement.projector(module_1_2, [0])
    with pytest.raises(InputError):
        relation_values(e0, Side.RIGHT, EndoElement.projector(module_1_2, [1]))
    with pytest.raises(InputError):
        relation_component(e0, Side.RIGHT, ["1"])
