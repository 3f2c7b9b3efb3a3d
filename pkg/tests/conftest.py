import random

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from chessmask.board import random_game

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def positions(draw, max_plies=60):
    """A board reached by a seeded random legal game."""
    seed = draw(st.integers(0, 2**32 - 1))
    plies = draw(st.integers(0, max_plies))
    return random_game(random.Random(seed), plies)[-1]


@st.composite
def games(draw, max_plies=40):
    """SAN move list of a seeded random legal game."""
    from chessmask.board import legal_moves, _make

    seed = draw(st.integers(0, 2**32 - 1))
    plies = draw(st.integers(1, max_plies))
    boards = random_game(random.Random(seed), plies)
    sans = []
    for before, after in zip(boards, boards[1:]):
        sans.append(next(m.san for m in legal_moves(before) if _make(before, m.move) == after))
    return sans


@pytest.fixture
def rng():
    return random.Random(1234)
