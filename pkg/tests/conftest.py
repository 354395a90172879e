import numpy as np
import pytest

from foliapyn.leaf_complex import LeafGrid
from foliapyn.potential import PolyTerm, TrigPotential, TrigTerm, random_potential


@pytest.fixture
def circle():
    return LeafGrid(1, (64,), (1 / 64,))


@pytest.fixture
def small_circle():
    return LeafGrid(1, (8,), (1 / 8,))


@pytest.fixture
def torus():
    return LeafGrid(2, (8, 8), (1 / 8, 1 / 8))


@pytest.fixture
def cos_potential():
    """phi = cos(2 pi h) on a circle leaf."""
    return TrigPotential(1, trig=[TrigTerm(1., (1,), ('cos',))])


@pytest.fixture
def torus_potential():
    return random_potential(np.random.default_rng(11), 2)


@pytest.fixture
def product_morse_function():
    """f = cos(2 pi h) (2 + cos(2 pi v))."""
    return TrigPotential(1, 1, trig=[TrigTerm(2., (1, 0), ('cos', 'cos')), TrigTerm(1., (1, 1), ('cos', 'cos'))])


@pytest.fixture
def birth_death_function():
    """f = h^3 / 3 - v h."""
    return TrigPotential(1, 1, polynomial=[PolyTerm(1 / 3, (3, 0)), PolyTerm(-1., (1, 1))])
