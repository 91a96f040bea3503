import math

import pytest

from ehnode.config import load_config
from ehnode.cli import default_config_path
from ehnode.model import ModelParams, build_model
from ehnode.solver import solve


def tiny_params(**changes) -> ModelParams:
    """12-state instance: e_max=2, k_tx=1, unit queues, Bernoulli(0.15) arrivals."""
    base = dict(e_max=2, q_lp_max=1, q_hp_max=1, k_tx=1, mu=0.99,
                harvest_dist=((1, 0.9), (0, 0.1)),
                arrival_lp=(0.85, 0.15), arrival_hp=(0.85, 0.15),
                weight_lp=0.4, weight_hp=0.6,
                loss_limit_lp=math.inf, loss_limit_hp=math.inf)
    base.update(changes)
    return ModelParams(**base)


@pytest.fixture(scope="session")
def paper_cfg():
    return load_config(default_config_path())


@pytest.fixture(scope="session")
def paper_params(paper_cfg):
    return paper_cfg.params


@pytest.fixture(scope="session")
def paper_model(paper_params):
    return build_model(paper_params)


@pytest.fixture(scope="session")
def paper_solution(paper_model):
    return solve(paper_model)


@pytest.fixture(scope="session")
def tiny():
    return tiny_params()


@pytest.fixture(scope="session")
def tiny_model(tiny):
    return build_model(tiny)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
