from __future__ import annotations

import hashlib
import json

import pytest
import yaml

from fablink.cli import main
from fablink.scenario import (
    ConfigInvalid,
    default_scenario,
    dump_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def test_default_config_round_trips_through_dump_and_load(tmp_path):
    scenario = default_scenario()
    text = dump_scenario(scenario)
    path = tmp_path / "scenario.yaml"
    path.write_text(text, encoding="utf-8")
    reloaded = load_scenario(str(path))
    assert scenario_to_dict(reloaded) == scenario_to_dict(scenario)


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigInvalid) as err:
        scenario_from_dict({"seed": 1, "horizont": 10})
    assert "horizont" in str(err.value)


def test_unknown_nested_key_rejected():
    with pytest.raises(ConfigInvalid) as err:
        scenario_from_dict({"radio": {"snr": 15.0}})
    assert "radio" in str(err.value)


def test_overlapping_bwp_parts_rejected_with_overlap_named():
    data = {
        "nr": {
            "bwp_carrier_prb": 100,
            "bwp_parts": [
                {"scs_khz": 15, "start_prb": 0, "size_prb": 60},
                {"scs_khz": 30, "start_prb": 50, "size_prb": 50},
            ],
        }
    }
    with pytest.raises(ConfigInvalid) as err:
        scenario_from_dict(data)
    assert "overlap" in str(err.value)
    assert "[50, 60)" in str(err.value)


def test_disjoint_mixed_numerology_bwp_accepted():
    data = {
        "nr": {
            "bwp_carrier_prb": 100,
            "bwp_parts": [
                {"scs_khz": 15, "start_prb": 0, "size_prb": 50},
                {"scs_khz": 30, "start_prb": 50, "size_prb": 50},
            ],
        }
    }
    scenario = scenario_from_dict(data)
    assert len(scenario.nr.bwp_parts) == 2


def test_bad_script_action_rejected():
    with pytest.raises(ConfigInvalid):
        scenario_from_dict({"script": [{"at_s": 1.0, "action": "explode"}]})


def test_bad_waveform_rejected():
    with pytest.raises(ConfigInvalid):
        scenario_from_dict({"radio": {"waveform": "QAM-OFDM"}})


def test_watchdog_must_cover_cycle():
    with pytest.raises(ConfigInvalid):
        scenario_from_dict({"safety": {"watchdog_ms": 1.0}})


def test_custom_catalog_profiles():
    scenario = scenario_from_dict(
        {
            "traffic": {
                "catalog": [
                    {
                        "name": "control",
                        "source": "plc",
                        "destination": "robot",
                        "protocol": "UDP",
                        "class": "safety",
                        "payload_bytes": 50,
                        "rate_hz": 100.0,
                        "pattern": "poisson",
                        "wireless": True,
                    }
                ]
            }
        }
    )
    profiles = scenario.traffic.profiles()
    assert len(profiles) == 1
    assert profiles[0].name == "control"
    assert profiles[0].rate_hz == 100.0


def test_transit_matrix_completeness_checked():
    with pytest.raises(ConfigInvalid) as err:
        scenario_from_dict(
            {
                "factory": {
                    "islands": [
                        {"id": "a", "capabilities": ["engrave"]},
                        {"id": "b", "capabilities": ["weigh"]},
                    ],
                    "transit_s": {"a": {"b": 5.0}},
                    "robot_home": "a",
                    "releases": {"island": "a"},
                }
            }
        )
    assert "transit_s" in str(err.value)


def test_recipe_without_capability_needs_manual_station():
    with pytest.raises(ConfigInvalid):
        scenario_from_dict(
            {
                "factory": {
                    "recipe": ["engrave", "paint"],
                    "islands": [{"id": "island1", "capabilities": ["engrave"]}],
                    "manual_station": False,
                    "robot_home": "island1",
                    "releases": {"island": "island1"},
                }
            }
        )


# -- CLI ---------------------------------------------------------------------------


def _run_cli(*argv) -> int:
    return main(list(argv))


def test_cli_run_and_check_flow(tmp_path, capsys):
    out = tmp_path / "artifacts"
    code = _run_cli("run", "--horizon", "3", "--out", str(out))
    assert code == 0
    run_output = capsys.readouterr().out
    assert "aggregate rate" in run_output
    for name in [
        "metrics.json", "packets.csv", "safety_log.csv", "products.csv",
        "compliance.json", "compliance.txt",
    ]:
        assert (out / name).exists(), name

    code = _run_cli("check", str(out / "metrics.json"), "--profile", "aspect1")
    assert code == 0
    table = capsys.readouterr().out
    assert "pnio_coupler_to_plc" in table and "Pass" in table

    code = _run_cli("check", str(out / "metrics.json"), "--profile", "aspect2")
    assert code == 0
    assert "service_data_rate" in capsys.readouterr().out


def test_cli_check_unknown_profile(tmp_path, capsys):
    metrics = tmp_path / "metrics.json"
    metrics.write_text("{}", encoding="utf-8")
    assert _run_cli("check", str(metrics), "--profile", "aspect9") == 2


def test_cli_check_fails_on_failed_dimension(tmp_path, capsys):
    out = tmp_path / "artifacts"
    assert _run_cli("run", "--horizon", "3", "--out", str(out)) == 0
    capsys.readouterr()
    doc = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    # corrupt the aggregate rate below the aspect-2 bound
    doc["aggregate"]["observed_rate_bps"] = 1.0e6
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc), encoding="utf-8")
    assert _run_cli("check", str(bad), "--profile", "aspect2") == 1


def test_cli_profiles_lists_both_aspects(capsys):
    assert _run_cli("profiles") == 0
    out = capsys.readouterr().out
    assert "aspect1" in out and "aspect2" in out
    assert "rate > 5 Mbit/s" in out


def test_cli_catalog_class_filter(capsys):
    assert _run_cli("catalog", "--class", "safety") == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 2  # exactly the two cyclic PNIO rows
    assert all("PNIO" in line for line in lines)

    assert _run_cli("catalog") == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 9


def test_cli_config_dump_is_loadable(tmp_path, capsys):
    assert _run_cli("config", "dump") == 0
    text = capsys.readouterr().out
    parsed = yaml.safe_load(text)
    scenario = scenario_from_dict(parsed)
    assert scenario.seed == default_scenario().seed


def test_cli_run_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("radio:\n  snr: oops\n", encoding="utf-8")
    assert _run_cli("run", "--config", str(bad), "--out", str(tmp_path / "o")) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_seed_override_changes_artifacts(tmp_path, capsys):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    scenario_path = tmp_path / "s.yaml"
    # low SNR makes packet losses common enough that the seed shows
    scenario_path.write_text(
        "horizon_s: 2\nradio:\n  snr_db: 12.0\n", encoding="utf-8"
    )
    assert _run_cli("run", "--config", str(scenario_path), "--seed", "1",
                    "--out", str(out1)) == 0
    assert _run_cli("run", "--config", str(scenario_path), "--seed", "2",
                    "--out", str(out2)) == 0
    capsys.readouterr()
    h1 = hashlib.sha256((out1 / "packets.csv").read_bytes()).hexdigest()
    h2 = hashlib.sha256((out2 / "packets.csv").read_bytes()).hexdigest()
    assert h1 != h2
