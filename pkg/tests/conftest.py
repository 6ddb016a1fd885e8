import random

import pytest

from src.semiperfect.adic_core import RingDescriptor
from src.semiperfect.endo_topology import EndoElement, dimension
from src.semiperfect.module_decomp import DecomposedModule


@pytest.fixture(scope="session")
def ring_2_2():
    """F_2[t]/(t^2)."""
    return RingDescriptor.truncated(2, 2)


@pytest.fixture(scope="session")
def ring_2_3():
    return RingDescriptor.truncated(2, 3)


@pytest.fixture(scope="session")
def ring_2_4():
    """F_2[t]/(t^4), the ring of the worked examples."""
    return RingDescriptor.truncated(2, 4)


@pytest.fixture(scope="session")
def ring_2_8():
    return RingDescriptor.truncated(2, 8)


@pytest.fixture(scope="session")
def ring_3_3():
    return RingDescriptor.truncated(3, 3)


@pytest.fixture(scope="session")
def pattern_2():
    """F_2[t]_(t), exact rational functions."""
    return RingDescriptor.pattern(2)


@pytest.fixture(scope="session")
def pattern_3():
    return RingDescriptor.pattern(3)


@pytest.fixture(scope="session")
def free_pair(ring_2_4):
    """(R/t^4)^2 over F_2."""
    return DecomposedModule.of_torsion(ring_2_4, [4, 4])


@pytest.fixture(scope="session")
def mixed_module(ring_2_4):
    """R/t + R/t^2 + R/t^2 over F_2[t]/(t^4)."""
    return DecomposedModule.of_torsion(ring_2_4, [1, 2, 2])


@pytest.fixture(scope="session")
def mixed_module_3(ring_3_3):
    return DecomposedModule.of_torsion(ring_3_3, [1, 3, 2, 3])


@pytest.fixture(scope="session")
def omega_module(pattern_2):
    """free^omega over F_2[t]_(t)."""
    return DecomposedModule.free_omega(pattern_2)


@pytest.fixture
def rng():
    """Seeded generator so randomized tests are reproducible."""
    return random.Random(20241019)


@pytest.fixture
def random_element(rng):
    """Factory drawing uniform elements of End(M)^op for a finite module M."""
    def draw(module):
        p = module.ring.prime
        return EndoElement.from_vector(module, [rng.randrange(p) for _ in range(dimension(module))])
    return draw
