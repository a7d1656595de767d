from pathlib import Path

import pytest

from relhyp.domain.group import CyclicFactor, FreeAbelianFactor, GroupSpec, Peripheral

SPECS_DIR = Path(__file__).resolve().parents[1] / "specs"


@pytest.fixture
def specs_dir() -> Path:
    return SPECS_DIR


@pytest.fixture
def zz() -> GroupSpec:
    """Z * Z relative to both factors."""
    return GroupSpec.free_product([FreeAbelianFactor(generators=["a"]), FreeAbelianFactor(generators=["b"])])


@pytest.fixture
def f2() -> GroupSpec:
    return GroupSpec.free(["a", "b"])


@pytest.fixture
def z2() -> GroupSpec:
    """Z^2 relative to <a> and <b>."""
    return GroupSpec.free_abelian(["a", "b"], [[0], [1]])


@pytest.fixture
def triangle() -> GroupSpec:
    """Z/2 * Z/3 modulo (ab)^7, relative to both factors."""
    return GroupSpec(
        family="one_relator",
        factors=[CyclicFactor(generator="a", order=2), CyclicFactor(generator="b", order=3)],
        peripherals=[Peripheral(factor=0), Peripheral(factor=1)],
        relator="(a b)^7",
    )
