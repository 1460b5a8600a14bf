from __future__ import annotations

import pytest

from forms import CUBIC, Y_DX, form
from pseudoabelian.darboux import UnfoldingParams, triangle_system
from pseudoabelian.tracer import interior_extremum


@pytest.fixture(scope="session")
def tri():
    return triangle_system()


@pytest.fixture(scope="session")
def p0():
    return UnfoldingParams(0.0, 0.0)


@pytest.fixture(scope="session")
def nest0(tri, p0):
    return interior_extremum(tri, p0)


@pytest.fixture(scope="session")
def ydx():
    return form(*Y_DX)


@pytest.fixture(scope="session")
def cubic():
    return form(*CUBIC)


@pytest.fixture
def report(capsys):
    """Print one line past pytest's output capture."""

    def emit(line: str) -> None:
        with capsys.disabled():
            print(f"\n{line}")

    return emit
