import json

import pytest

from bandmpc import config as cfgmod
from bandmpc.config import ConfigError, ExperimentConfig


def test_defaults_round_trip(tmp_path):
    cfg = ExperimentConfig()
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    again = cfgmod.load(str(path))
    assert again.to_dict() == cfg.to_dict()
    assert again.base_dir == str(tmp_path.resolve())


def test_default_values():
    cfg = cfgmod.load()
    assert (cfg.mpc.np, cfg.mpc.nc, cfg.mpc.rho) == (60, 50, cfgmod.EXPERIMENT_RHO)
    assert cfg.band_split_spec().order == 2
    assert cfg.lme_model().n_inputs == 2
    assert cfg.mpc_config().n_p == 60


def test_partial_file_merges_with_defaults(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"mpc": {"np": 200}, "seed": 4}))
    cfg = cfgmod.load(str(path))
    assert cfg.mpc.np == 200 and cfg.mpc.nc == 50 and cfg.seed == 4


def test_overrides_parse_json_values():
    cfg = cfgmod.load(None, ["mpc.rho=0.5", "use_composition=false", 'reference.type="gamma"', "plant=linear"])
    assert cfg.mpc.rho == 0.5 and cfg.use_composition is False
    assert cfg.reference.type == "gamma" and cfg.plant == "linear"


@pytest.mark.parametrize(
    "override",
    ["nosuch=1", "mpc.nosuch=1", "nosection.x=1", "mpc.np"],
)
def test_bad_overrides(override):
    with pytest.raises(ConfigError):
        cfgmod.load(None, [override])


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        cfgmod.from_dict({"mpc": {"np": 10, "horizon": 3}})
    with pytest.raises(ConfigError, match="unknown"):
        cfgmod.from_dict({"extra": 1})


@pytest.mark.parametrize(
    "override",
    [
        "fs=0",
        "mpc.nc=100",
        "mpc.rho=-1",
        "band_split.f_l=20",
        "band_split.f_c1=20000",
        'reference.type="square"',
        "reference.settle=1.0",
        "reference.freq=10000",
        "model_delay=-1",
        "use_composition=1",
        'plant="missing.json"',
        'rnn="missing.json"',
        "stability.np_step=0",
        "frequency.f_max=20000",
    ],
)
def test_validation_errors(override):
    with pytest.raises(ConfigError):
        cfgmod.load(None, [override])


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        cfgmod.load(str(tmp_path / "none.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        cfgmod.load(str(bad))


def test_relative_paths_resolve_against_config_dir(tmp_path):
    plant = tmp_path / "p.json"
    plant.write_text(json.dumps({"resonance_hz": 1500.0, "damping": 0.4}))
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"plant": "p.json"}))
    cfg = cfgmod.load(str(path))
    assert cfg.resolve(cfg.plant) == plant.resolve()


def test_shipped_data_files_exist():
    assert cfgmod.default_weights_path().is_file()
    assert cfgmod.default_plant_path().is_file()
