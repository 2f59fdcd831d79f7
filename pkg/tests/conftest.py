import dataclasses

import pytest

from casimir_dyn import parse_config


@pytest.fixture(scope="session")
def run_config():
    return parse_config()


@pytest.fixture(scope="session")
def system(run_config):
    return run_config.system


@pytest.fixture(scope="session")
def gold_field(run_config):
    """Tabulated sphere-plate force for the default gold/gold setup."""
    return run_config.build_field()


@pytest.fixture(scope="session")
def natural_system(system):
    """Same system with the feedback damping on cantilever 2 switched off."""
    return dataclasses.replace(system, extra_damping_2=0.0)
