import pytest

from errors import ConfigError
from settings import CONFIG_ENV, QDSConfig, load_config, parse_config_text


def test_empty_text_gives_defaults():
    cfg = parse_config_text("")
    assert cfg == QDSConfig()
    assert cfg.target_psec == 2e-4
    assert cfg.k_test is None


def test_comments_blank_lines_and_integers():
    cfg = parse_config_text("""
        # source
        mu = 0.5   # signal
        nu = 0.2

        n_pulses = 1e9
        k_test = 250
    """)
    assert (cfg.mu, cfg.nu) == (0.5, 0.2)
    assert cfg.n_pulses == 10**9 and isinstance(cfg.n_pulses, int)
    assert cfg.security().test_keys(10**6) == 250


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("color = blue", "unknown key color"),
        ("mu = lots", "mu = 'lots' is not a number"),
        ("mu = 0.3\nmu = 0.4", "duplicate key mu"),
        ("just words", "expected 'key = value'"),
        ("eps_pe = 0", "eps_pe"),
        ("mu = 0.1\nnu = 0.2", "nu=0.2 must be below mu=0.1"),
    ],
)
def test_bad_config_names_the_problem(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text, source="bad.conf")


def test_field_device_file(sample_data):
    cfg = load_config(sample_data / "field_device.conf")
    assert cfg.mu == 0.37 and cfg.p_z_tx == 0.979
    assert cfg.n_pulses == 2 * 10**12
    assert cfg.seed == 2019
    assert cfg.channel(103).distance_km == 103.0
    assert cfg.pulse_config(n_pulses=10).n_pulses == 10


def test_environment_variable_names_default_file(tmp_path, monkeypatch):
    path = tmp_path / "env.conf"
    path.write_text("misalignment = 0.02\n")
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config().misalignment == 0.02
    monkeypatch.delenv(CONFIG_ENV)
    assert load_config() == QDSConfig()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "nope.conf")
