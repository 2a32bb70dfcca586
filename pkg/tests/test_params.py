import json

import pytest

from photon_presence import ConfigError, ExperimentParams, ModelKind, RunConfig


def test_defaults_match_experiment():
    p = ExperimentParams()
    assert p.epsilon == 0.01
    assert p.ts_seconds == 1e-3
    assert p.omegas == (110.0, 120.0, 130.0, 140.0, 150.0)
    assert p.ns == 5000 and p.n_windows == 500
    assert p.eta_present and not p.third_order


@pytest.mark.parametrize(
    "kwargs",
    [
        {"epsilon": -0.1},
        {"epsilon": 1.0},
        {"ts_seconds": 0.0},
        {"omegas": (110, 110, 130, 140, 150)},
        {"omegas": (110, 120, 130, 140)},
        {"omegas": (0, 120, 130, 140, 150)},
        {"ns": -1},
        {"n_windows": 0},
    ],
)
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ExperimentParams(**kwargs)


def test_params_json_round_trip():
    p = ExperimentParams(epsilon=0.02, ns=100, n_windows=7, eta_present=False, third_order=True)
    d = json.loads(json.dumps(p.to_dict()))
    assert set(d) == {"epsilon", "ts_seconds", "omegas", "ns", "windows", "eta", "third_order"}
    assert ExperimentParams.from_dict(d) == p


def test_unknown_key_names_the_key():
    with pytest.raises(ConfigError) as exc:
        ExperimentParams.from_dict({"epsilon": 0.01, "bogus": 3})
    assert exc.value.key == "bogus"


@pytest.mark.parametrize(
    "doc,key",
    [
        ({"ns": "many"}, "ns"),
        ({"windows": 2.5}, "windows"),
        ({"eta": "maybe"}, "eta"),
        ({"seed": -4}, "seed"),
        ({"target": 9}, "target"),
        ({"model": "localized_l9"}, "model"),
        ({"runs": 0}, "runs"),
    ],
)
def test_run_config_errors_name_key(doc, key):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict(doc)
    assert exc.value.key == key


def test_run_config_round_trip(tmp_path):
    cfg = RunConfig(ExperimentParams(epsilon=0.005), ModelKind.localized_l4(), seed=7, target=4, runs=12, out="x")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.from_file(path) == cfg


def test_model_kind_validation():
    with pytest.raises(ValueError):
        ModelKind("simplified_ba")
    with pytest.raises(ValueError):
        ModelKind("ba", location=2)
    with pytest.raises(ValueError):
        ModelKind.simplified_localized(1, eta=False, delta=-1e-3)
    assert ModelKind.simplified_ba(3, eta=False).label == "simplified_ba_L3_no_eta"
    assert ModelKind.from_value({"kind": "localized_l1"}) == ModelKind.localized_l1()
