import json

import numpy as np
import pytest

from mfmaxwell import config as cm

CONFIGS = sorted((__import__("pathlib").Path(__file__).parents[1] / "configs").glob("*.json"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = cm.load(path)
    assert cm.METHOD_ZETA[cfg.reconstruction.method] == cfg.zeta
    assert cfg.material_params().sigma.min() > 0


def test_defaults_round_trip():
    cfg = cm.ExperimentConfig()
    again = cm.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg and again.hash == cfg.hash
    assert cfg.seed_cell == (8, 8, 8)


def test_unknown_keys_report_the_path():
    with pytest.raises(cm.ConfigError, match=r"materials\.sigma\.bumps\[0\]\.widht: unknown key"):
        cm.from_dict({"materials": {"sigma": {"bumps": [{"widht": 0.2}]}}})
    with pytest.raises(cm.ConfigError, match="^colour: unknown key"):
        cm.from_dict({"colour": 1})


@pytest.mark.parametrize("data, where", [
    ({"zeta": "zeta9"}, "zeta"),
    ({"illuminations": ["e1", "e2"]}, "illuminations"),
    ({"illuminations": ["e1", "e2", "grad(x1**3)"]}, "illuminations"),
    ({"reconstruction": {"method": "magic"}}, "reconstruction.method"),
    ({"zeta": "zeta3", "illuminations": ["e1"] * 6, "reconstruction": {"method": "electroseismic"}}, "materials.L"),
    ({"reconstruction": {"seed_cell": [0, 8, 8]}}, "reconstruction.seed_cell"),
    ({"reconstruction": {"illumination_indices": [0, 1, 7]}}, "reconstruction.illumination_indices"),
    ({"noise": {"level": -1}}, "noise.level"),
    ({"n": 5}, "n"),
    ({"materials": []}, "materials"),
])
def test_invalid_configs(data, where):
    with pytest.raises(cm.ConfigError) as exc:
        cm.from_dict(data)
    assert str(exc.value).startswith(where)


def test_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(cm.ConfigError, match="invalid JSON"):
        cm.load(p)


def test_problem_hash_ignores_reconstruction_and_output():
    a = cm.from_dict({})
    b = cm.from_dict({"output": "elsewhere", "reconstruction": {"seed_cell": [7, 7, 7]},
                      "cover": {"max_size": 2}, "solver": {"workers": 3}})
    c = cm.from_dict({"noise": {"level": 0.01}})
    assert a.problem_hash == b.problem_hash and a.hash != b.hash
    assert a.problem_hash != c.problem_hash


def test_bumps_reach_the_fields():
    cfg = cm.from_dict({"materials": {"eps": {"base": 2.0, "bumps": [{"amplitude": 0.5, "width": 0.3}]},
                                      "L": {"base": 3.0}}})
    p = cfg.material_params()
    assert p.eps.max() > 2.4 and p.eps.min() >= 2.0
    assert np.all(cfg.L_field() == 3.0)
