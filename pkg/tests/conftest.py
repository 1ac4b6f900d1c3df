import numpy as np
import pytest
from httpx import ASGITransport, AsyncClient

from udn.api.main import app
from udn.core import validate_config
from udn.geometry import from_links
from udn.models import NetworkRealization
from udn.schemas import SimConfig


@pytest.fixture
async def api_client():
    """Yields a client object to be used for API testing."""
    yield AsyncClient(
        base_url="http://testserver", transport=ASGITransport(app=app)
    )


@pytest.fixture
def small_config() -> SimConfig:
    """
    A fast configuration: a 30 m torus at the reference density, so about
    45 links, run for 2000 slots.
    """
    return validate_config(
        {
            "intensity": 0.05,
            "window_side": 30,
            "link_distance": 1,
            "access_prob": 0.5,
            "arrival_rate": 0.1,
            "horizon": 2000,
            "seed": 2024,
            "realizations": 3,
        }
    )


@pytest.fixture
def isolated_link() -> NetworkRealization:
    """A single link of length 1 in a 100 m window."""
    return from_links([((10.0, 10.0), (11.0, 10.0))], 100.0)


@pytest.fixture
def two_links() -> NetworkRealization:
    """
    Two collinear links: the second transmitter is at distance 2 from the
    first receiver, the first transmitter at distance 4 from the second.
    """
    return from_links(
        [((0.0, 0.0), (1.0, 0.0)), ((3.0, 0.0), (4.0, 0.0))], 100.0
    )


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded generator for test-side sampling."""
    return np.random.default_rng(12345)
