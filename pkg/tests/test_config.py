import math

import pytest

from psfpc.config import PRESETS, ConfigError, ScenarioConfig, dump_config, load_config, preset


def test_defaults():
    c = ScenarioConfig()
    assert c.algorithm == "psfpc" and c.n_nodes == 20 and c.snr_db == 30.0
    assert c.oscillator_params().snr_linear == pytest.approx(1000.0)
    assert not c.filtered and not c.dfpc


@pytest.mark.parametrize("algo,mode", [("em_kf_psfpc", "em"), ("kf_psfpc", "genie"), ("psfpc", "genie")])
def test_em_mode_defaults(algo, mode):
    assert ScenarioConfig(algorithm=algo).em_mode == mode


@pytest.mark.parametrize(
    "kw",
    [
        {"algorithm": "gossip"},
        {"algorithm": "em_kf_psfpc", "em_mode": "naive"},
        {"algorithm": "kf_psfpc", "em_mode": "em"},
        {"algorithm": "dfpc"},
        {"em_init_case": "custom"},
        {"n_trials": 0},
        {"connectivity": 1.5},
        {"alpha_em": 1.0},
        {"f_s_hz": 1.0},
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        ScenarioConfig(**kw)


def test_overrides_rederive_em_mode():
    c = ScenarioConfig(algorithm="em_kf_psfpc").with_overrides(algorithm="kf_psfpc", n_nodes=None)
    assert c.em_mode == "genie" and c.n_nodes == 20


def test_noiseless_variant():
    p = ScenarioConfig().noiseless().oscillator_params()
    assert p.beta1 == 0.0 and math.isinf(p.snr_linear)


def test_toml_roundtrip(tmp_path):
    c = ScenarioConfig(algorithm="em_kf_dfpc", directed=False, n_nodes=40, alpha_em=0.95,
                       name="x").noiseless()
    path = tmp_path / "c.toml"
    path.write_text(dump_config(c))
    assert load_config(path) == c


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("n_nodes = 10\nbogus = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_presets_resolve():
    for name in PRESETS:
        cfgs = preset(name)
        assert cfgs and all(isinstance(c, ScenarioConfig) for c in cfgs)
        assert len({c.name for c in cfgs}) == len(cfgs)
    assert len(preset("fig3")) == 24
    assert {c.n_trials for c in preset("fig4")} == {1000}
    with pytest.raises(ConfigError):
        preset("fig9")
