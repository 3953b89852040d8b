from __future__ import annotations

import pytest

import helpers


@pytest.fixture(scope="session")
def casestudy_registry():
    return helpers.load_casestudy_registry()


@pytest.fixture()
def golden_deps(casestudy_registry):
    return helpers.golden_deps(casestudy_registry)
