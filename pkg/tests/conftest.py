import json

import pytest

from tipsmon import harness
from tipsmon.catalog import compose, load_catalog_file
from tipsmon.specparse import load_spec_file


@pytest.fixture(scope="session")
def golden_catalog_path():
    return harness.data_path(harness.GOLDEN_CATALOG)


@pytest.fixture(scope="session")
def golden_catalog(golden_catalog_path):
    return load_catalog_file(golden_catalog_path)


@pytest.fixture(scope="session")
def golden_catalog_doc(golden_catalog_path):
    return json.loads(golden_catalog_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def golden_spec_path():
    return harness.data_path(harness.GOLDEN_SPEC)


@pytest.fixture(scope="session")
def golden_spec(golden_catalog, golden_spec_path):
    return load_spec_file(golden_spec_path, golden_catalog)


@pytest.fixture(scope="session")
def golden_spec_doc(golden_spec_path):
    return json.loads(golden_spec_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def suture_spec(golden_catalog):
    return load_spec_file(harness.data_path(harness.SUTURE_SPEC), golden_catalog)


@pytest.fixture(scope="session")
def golden_scene(golden_catalog):
    return compose(golden_catalog, list(golden_catalog.simlets))
