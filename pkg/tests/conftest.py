from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from netsac.envs import line_env, sis_env
from netsac.graph import Graph

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def line2():
    return line_env(2, 0.7)


@pytest.fixture(scope="session")
def line4():
    return line_env(4, 0.7)


@pytest.fixture(scope="session")
def sis3():
    return sis_env(Graph.line(3), 0.7, delta=0.3, beta=[0.6, 0.2], cost=[0.0, 0.3])


def random_policy(mdp, seed, scale=1.0):
    from netsac.policy import LocalizedPolicyTable

    gen = np.random.default_rng(seed)
    return LocalizedPolicyTable([scale * gen.standard_normal(s) for s in mdp.policy_shapes()])


# PASS/FAIL lines recorded by the acceptance module, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
