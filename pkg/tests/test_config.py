"""
Configuration Tests
===================
Config merging and validation, canonical serialization and the audit envelope.
"""

from fractions import Fraction

import pytest

from permin.audit_logger import checksum, envelope
from permin.config import load_config, parse_override
from permin.errors import ConfigError, ValidationError
from permin.modules.dynamics import SymbolPoint, TorusPoint
from permin.serialization import dumps, point_from_json, rational_from_json, to_plain


@pytest.fixture
def no_env(tmp_path):
    return tmp_path / "missing.env"


# =============================================================================
# LOADING
# =============================================================================

def test_load_example(config_dir, no_env):
    cfg = load_config(config_dir / "sft_example.json", env_file=no_env)
    assert cfg.system.kind == "full_shift"
    assert cfg.epsilon == Fraction(1, 10)
    assert cfg.alpha == 1
    assert cfg.N == 10
    assert cfg.rng_seed == 7
    assert cfg.construction.L_hat == 100


def test_overrides_take_precedence(config_dir, no_env):
    cfg = load_config(config_dir / "sft_example.json",
                      ["N=5", "construction.L_hat=1000", "sweep.inflation=\"1/2\""], env_file=no_env)
    assert cfg.N == 5
    assert cfg.construction.L_hat == 1000
    assert cfg.sweep.inflation == Fraction(1, 2)


def test_seed_sources(config_dir, no_env, monkeypatch):
    monkeypatch.setenv("PERMIN_RNG_SEED", "42")
    assert load_config(None, ['system={"kind": "circle", "k": 2}'], env_file=no_env).rng_seed == 42
    assert load_config(config_dir / "sft_example.json", env_file=no_env).rng_seed == 7
    assert load_config(config_dir / "sft_example.json", seed=5, env_file=no_env).rng_seed == 5


def test_dotenv_file_is_read(tmp_path, monkeypatch):
    env = tmp_path / ".env"
    env.write_text("PERMIN_OUT_DIR=from-dotenv\n", encoding="utf-8")
    cfg = load_config(None, ['system={"kind": "full_shift", "m": 2}'], env_file=env)
    assert cfg.out_dir == "from-dotenv"
    monkeypatch.delenv("PERMIN_OUT_DIR", raising=False)


@pytest.mark.parametrize("override,field", [
    ("alpha=2", "alpha"),
    ("epsilon=0", "epsilon"),
    ("N=0", "N"),
    ("bogus=1", "bogus"),
    ('system={"kind": "baker"}', "system.kind"),
])
def test_invalid_values_name_the_field(config_dir, no_env, override, field):
    with pytest.raises(ConfigError) as info:
        load_config(config_dir / "sft_example.json", [override], env_file=no_env)
    assert info.value.fields["field"] == field


def test_missing_system(no_env):
    with pytest.raises(ConfigError) as info:
        load_config(None, env_file=no_env)
    assert info.value.fields["field"] == "system"


def test_missing_file(tmp_path, no_env):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "nope.json", env_file=no_env)


def test_require_names_the_missing_field(config_dir, no_env):
    cfg = load_config(config_dir / "shift_construct.json", env_file=no_env)
    with pytest.raises(ConfigError) as info:
        cfg.require("psi")
    assert info.value.fields["field"] == "psi"


def test_parse_override():
    assert parse_override("N=12") == ("N", 12)
    assert parse_override("orbit=01") == ("orbit", "01")
    assert parse_override('orbit="01"') == ("orbit", "01")
    assert parse_override("u=cos2pi(x)") == ("u", "cos2pi(x)")
    with pytest.raises(ConfigError):
        parse_override("N")


# =============================================================================
# SERIALIZATION
# =============================================================================

def test_to_plain():
    assert to_plain(Fraction(1, 3)) == "1/3"
    assert to_plain(float("inf")) == "inf"
    assert to_plain({1: (Fraction(2), 0.5)}) == {"1": ["2", 0.5]}


def test_rationals_and_points(shift2, cat):
    assert rational_from_json("3/4") == Fraction(3, 4)
    assert rational_from_json(0.25) == Fraction(1, 4)
    with pytest.raises(ValidationError):
        rational_from_json("1/0")
    assert point_from_json(shift2, {"prefix": "1", "period": "0"}) == SymbolPoint((0,), (1,))
    assert point_from_json(cat, ["1/2", "1/3"]) == TorusPoint(Fraction(1, 2), Fraction(1, 3))
    with pytest.raises(ValidationError):
        point_from_json(cat, "1/2")


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": Fraction(1, 2)}) == dumps({"a": Fraction(1, 2), "b": 1})


# =============================================================================
# AUDIT
# =============================================================================

def test_checksum_is_stable():
    digest = checksum({"a": 1, "b": [1, 2]})
    assert len(digest) == 16
    assert digest == checksum({"b": [1, 2], "a": 1})
    assert digest != checksum({"a": 2, "b": [1, 2]})


def test_envelope_fields():
    audit = envelope("beta", {"N": 3}, 7)
    assert audit["command"] == "beta"
    assert audit["rng_seed"] == 7
    assert audit["config_hash"] == checksum({"N": 3})
    assert set(audit["versions"]) == {"permin", "numpy", "python"}
