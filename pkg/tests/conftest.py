"""Shared fixtures.

Training a full bundle takes tens of seconds, so the expensive ones are
session scoped and reused by the unit tests and the acceptance suite.
"""

from __future__ import annotations

import pytest

from hilcloud.experiments import GROUP_SEEDS, ExperimentConfig, build_datasets, demo_group
from hilcloud.models import train_bundle


@pytest.fixture(scope="session")
def config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def groups(config):
    return {g: demo_group(config, g) for g in GROUP_SEEDS}


@pytest.fixture(scope="session")
def target_original(config):
    return config.scenario("orig-2x2")


@pytest.fixture(scope="session")
def target_new(config):
    return config.scenario("new-2x2")


@pytest.fixture(scope="session")
def pools_original(config, groups, target_original):
    return build_datasets(config, target_original, groups)


@pytest.fixture(scope="session")
def pools_new(config, groups, target_new):
    return build_datasets(config, target_new, groups)


@pytest.fixture(scope="session")
def d3_original_run(pools_original, config):
    return train_bundle(pools_original["D3"], epochs=config.epochs, seed=0)


@pytest.fixture(scope="session")
def d3_original(d3_original_run):
    return d3_original_run.bundle


@pytest.fixture(scope="session")
def d3_new(pools_new, config):
    return train_bundle(pools_new["D3"], epochs=config.epochs, seed=0).bundle


@pytest.fixture(scope="session")
def d1_new(pools_new, config):
    return train_bundle(pools_new["D1"], epochs=config.epochs, seed=0).bundle


@pytest.fixture(scope="session")
def small_bundle(groups):
    """Cheap bundle for plumbing tests: 5 demos, few reactive epochs."""
    return train_bundle(groups["orig-2x2"], epochs=20, seed=3, sequential_epochs=300).bundle


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
