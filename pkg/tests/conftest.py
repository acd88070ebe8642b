import pytest

from squeezekit import epr, filters, ifo


@pytest.fixture(scope="session")
def cfg():
    return ifo.IfoConfig()


@pytest.fixture(scope="session")
def grid():
    return filters.default_grid()


@pytest.fixture(scope="session")
def solution(cfg):
    sol, _ = filters.synthesize_filters(cfg)
    return sol


@pytest.fixture(scope="session")
def epr_params(cfg, solution):
    return epr.select_epr_params(cfg, epr.solve_epr_params(cfg, solution))
