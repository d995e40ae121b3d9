import pytest

from coassembly import loaders


@pytest.fixture(scope="session")
def reference_scenario_path():
    return loaders.asset_path("reference_scenario.json")


@pytest.fixture(scope="session")
def reference_config():
    return loaders.load_scenario(loaders.asset_path("reference_scenario.json"))


@pytest.fixture(scope="session")
def reference_script():
    return loaders.load_script(loaders.asset_path("reference_script.json"))


@pytest.fixture(scope="session")
def reference_plan():
    return loaders.load_plan(loaders.asset_path("gearbox_plan.json"))
