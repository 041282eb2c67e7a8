import pytest

from micropull import builtin_catalog, select_specimen


@pytest.fixture(scope="session")
def catalog():
    return builtin_catalog()


@pytest.fixture(scope="session")
def st1_1_measured(catalog):
    return select_specimen(catalog, "ST1-1", "measured")


@pytest.fixture(scope="session")
def st1_4_measured(catalog):
    return select_specimen(catalog, "ST1-4", "measured")


@pytest.fixture(scope="session")
def st1_6_measured(catalog):
    return select_specimen(catalog, "ST1-6", "measured")
