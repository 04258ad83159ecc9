from pathlib import Path

import pytest

from channel_model import ChannelParams, Link, PulseConfig, expected_statistics
from counts_io import read_counts
from security import SecurityParams

SAMPLE_DATA = Path(__file__).resolve().parent.parent / "sample_data"


@pytest.fixture
def sample_data():
    return SAMPLE_DATA


@pytest.fixture
def field_channel():
    return ChannelParams()


@pytest.fixture
def field_source():
    """Source settings back-fitted from the 103 km counts."""
    return PulseConfig(mu=0.37, nu=0.068, p_mu=0.95, p_z_tx=0.979, p_z_rx=0.979, n_pulses=2 * 10**12)


@pytest.fixture
def default_params():
    return SecurityParams()


@pytest.fixture
def noise_free_channel():
    return ChannelParams(misalignment=0.0, dark_count_rate_hz=0.0)


@pytest.fixture
def desk_source():
    return PulseConfig(mu=0.5, nu=0.1, p_mu=0.7, p_z_tx=0.5, p_z_rx=0.5, n_pulses=200_000)


@pytest.fixture
def counts_50km(field_source, field_channel):
    counts = expected_statistics(field_source, field_channel.at_distance(50))
    return {link: counts for link in Link}


@pytest.fixture
def field_run():
    def load(distance_km):
        return read_counts(SAMPLE_DATA / f"field_run_{distance_km}km.csv")
    return load
