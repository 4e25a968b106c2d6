import pytest

from vnflow.config import FlowSpec, load_config, loads_config
from vnflow.errors import ConfigError, NonIrrational

CONFIGS = ["golden_demo", "golden_linear", "sqrt2m1", "cf123"]


@pytest.mark.parametrize("name", CONFIGS)
def test_shipped_configs_load(configs_dir, name):
    spec = load_config(configs_dir / f"{name}.yaml")
    flow = spec.build_flow()
    assert flow.roof.A == 1.0 and flow.roof.L > 0
    assert spec.echo()["name"] == spec.name


def test_defaults():
    spec = loads_config("")
    assert isinstance(spec, FlowSpec)
    assert spec.alpha == "golden" and spec.precision == 256


def test_env_precision(monkeypatch):
    monkeypatch.setenv("VNFLOW_PRECISION", "128")
    assert loads_config("").precision == 128
    assert loads_config("precision: 64").precision == 64
    monkeypatch.setenv("VNFLOW_PRECISION", "lots")
    with pytest.raises(ConfigError):
        loads_config("")


@pytest.mark.parametrize("text, field", [
    ("colour: red", "colour"),
    ("roof: {A: 0}", "roof.A"),
    ("roof: {g: [[0, 1.0, 0.0]]}", "roof.g[0][0]"),
    ("roof: {g: [[1, 1.0]]}", "roof.g[0]"),
    ("roof: {normalize: 3}", "roof.normalize"),
    ("precision: 100", "precision"),
    ("certify: {pairs: 1.5}", "certify.pairs"),
    ("certify: {colour: 1}", "certify.colour"),
    ("alpha: {periodic: [0]}", "alpha.periodic"),
    ("step_budget: 0", "step_budget"),
])
def test_field_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=__import__("re").escape(field)):
        loads_config(text)


def test_yaml_errors_give_the_line():
    with pytest.raises(ConfigError, match="line 2"):
        loads_config("name: x\nroof: A: 1\n")


def test_rational_alpha_is_rejected():
    with pytest.raises(NonIrrational):
        loads_config("alpha: {quotients: [1, 2]}").build_flow()
