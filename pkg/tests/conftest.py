import pytest

from eivlab.geometry import Menu, mix_menus
from eivlab.prior import PriorModel

from batteries import A2_PTS, A_PTS, B2_PTS, B_PTS


@pytest.fixture
def uniform3():
    return PriorModel.uniform(3, seed=20240601)


@pytest.fixture
def simplex3():
    return Menu(B_PTS)


@pytest.fixture
def mix_a():
    return mix_menus(0.5, Menu(A_PTS), Menu(A2_PTS))


@pytest.fixture
def mix_b():
    return mix_menus(0.5, Menu(B_PTS), Menu(B2_PTS))
