import numpy as np
import pytest

from wslab.cross_section import CrossSectionShape, generate_mesh

ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def ellipse_mesh_coarse():
    return generate_mesh(CrossSectionShape.ellipse(1.0, 0.5), 0.25)


@pytest.fixture(scope="session")
def ellipse_mesh():
    return generate_mesh(CrossSectionShape.ellipse(1.0, 0.5), 0.125)


@pytest.fixture(scope="session")
def disc_mesh_coarse():
    return generate_mesh(CrossSectionShape.disc(1.0), 0.25)


@pytest.fixture(scope="session")
def square_mesh():
    return generate_mesh(CrossSectionShape.rectangle(1.0, 1.0), 1 / 16)


def bessel_j0(x: float, terms: int = 60) -> float:
    """Power series of J0."""
    total, term = 0.0, 1.0
    for k in range(terms):
        if k:
            term *= -(x / 2) ** 2 / (k * k)
        total += term
    return total


def bessel_j0_first_root() -> float:
    lo, hi = 2.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bessel_j0(lo) * bessel_j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
