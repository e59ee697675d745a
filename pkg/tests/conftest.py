import pytest

from pbitsim.config import AppConfig


@pytest.fixture(scope="session")
def cfg() -> AppConfig:
    """Shipped default configuration."""
    return AppConfig.load()


@pytest.fixture(scope="session")
def pblock(cfg):
    return cfg.pblock()


@pytest.fixture(scope="session")
def mtj(cfg):
    return cfg.mtj()


@pytest.fixture(scope="session")
def blocks(cfg):
    return cfg.blocks()


@pytest.fixture(scope="session")
def and_network(cfg):
    return cfg.network()
