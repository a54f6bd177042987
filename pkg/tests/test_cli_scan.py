"""Sweep plumbing and CLI contract: configs, manifests, exit codes.

Physics correctness lives in the other test modules; here we only care that
the tool is deterministic, honest about failures, and writes what it says
it writes.
"""

import csv
import io
import json
import math

import numpy as np
import pytest

from cvmdi.cli_scan import (
    AxisSpec,
    MaxDistanceResult,
    SweepSpec,
    _parse_set,
    _render_csv,
    _render_json,
    _states_from_config,
    default_config,
    main,
    max_distance,
    resolve_config,
    run_sweep,
    sweep_from_config,
    validate_oracle,
)
from cvmdi.errors import ParameterError, PhysicalityError
from cvmdi.keyrate import ChannelParams, keyrate
from cvmdi.state_engine import StateSpec


# --------------------------------------------------------------------------
# axis / sweep spec validation
# --------------------------------------------------------------------------

def test_axis_values_linear_and_log():
    lin = AxisSpec("d", 0.0, 2.0, 5)
    assert np.allclose(lin.values(), [0.0, 0.5, 1.0, 1.5, 2.0])
    log = AxisSpec("L_AC", 1.0, 100.0, 3, spacing="log")
    assert np.allclose(log.values(), [1.0, 10.0, 100.0])


@pytest.mark.parametrize("axis", [
    AxisSpec("bogus", 0.0, 1.0, 5),
    AxisSpec("d", 0.0, 1.0, 1),
    AxisSpec("d", 1.0, 1.0, 5),
    AxisSpec("d", 2.0, 1.0, 5),
    AxisSpec("d", 0.0, 1.0, 5, spacing="cubic"),
    AxisSpec("d", 0.0, 1.0, 5, spacing="log"),
])
def test_axis_validation_rejects(axis):
    with pytest.raises(ParameterError):
        axis.validate()


def test_sweep_spec_validation():
    good = sweep_from_config({**default_config("prob-vs-tau"), "out": "x.csv"})
    assert good.mode == "prob-vs-tau"
    with pytest.raises(ParameterError):
        sweep_from_config({**default_config("prob-vs-tau"),
                           "out": "x.csv", "mode": "nonsense"})
    with pytest.raises(ParameterError):
        sweep_from_config({**default_config("prob-vs-tau"),
                           "out": "x.csv", "format": "xml"})
    with pytest.raises(ParameterError):
        sweep_from_config({**default_config("prob-vs-tau"),
                           "out": "x.csv", "workers": 0})
    with pytest.raises(ParameterError):
        sweep_from_config({**default_config("prob-vs-tau"),
                           "out": "x.csv", "states": []})
    with pytest.raises(ParameterError):
        sweep_from_config(default_config("prob-vs-tau"))  # no out path


def test_states_from_config():
    assert _states_from_config(["tmsv", [0, 1]]) == ("tmsv", (0, 1))
    with pytest.raises(ParameterError):
        _states_from_config(["epr"])


# --------------------------------------------------------------------------
# config resolution
# --------------------------------------------------------------------------

def test_parse_set_json_and_bare_values():
    assert _parse_set("channel.eta=0.99") == ("channel.eta", 0.99)
    assert _parse_set("states=[[0,1]]") == ("states", [[0, 1]])
    assert _parse_set("format=csv") == ("format", "csv")
    with pytest.raises(ParameterError):
        _parse_set("no-equals-sign")


def test_default_config_modes_have_expected_axes():
    assert default_config("prob-vs-tau")["axis1"]["name"] == "tau"
    assert default_config("keyrate-vs-distance")["axis1"]["name"] == "L_AC"
    grid = default_config("grid-d-L")
    assert (grid["axis1"]["name"], grid["axis2"]["name"]) == ("d", "L_AC")
    assert default_config("keyrate-vs-eta")["axis1"]["name"] == "eta"
    assert default_config("oracle-validate")["oracle"]["orders"] == [0, 1, 2]


def test_resolve_config_layering(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"state": {"d": 1.5},
                                    "axis1": {"count": 7}}))
    cfg = resolve_config("prob-vs-tau", config_path=str(cfg_file),
                         set_exprs=["state.tau=0.8", "workers=2"],
                         out="sweep.csv", fmt="json")
    assert cfg["state"]["d"] == 1.5          # from the file
    assert cfg["state"]["tau"] == 0.8        # --set beats the file
    assert cfg["axis1"]["count"] == 7        # deep update keeps siblings
    assert cfg["axis1"]["name"] == "tau"
    assert cfg["workers"] == 2
    assert cfg["out"] == "sweep.csv"
    assert cfg["format"] == "json"


# --------------------------------------------------------------------------
# renderers
# --------------------------------------------------------------------------

def test_render_csv_formats_cells():
    text = _render_csv(["a [1]", "b [1]"], [["x", 1.5], [None, float("nan")]])
    lines = text.strip().split("\n")
    assert lines[0] == "a [1],b [1]"
    assert lines[1] == "x,1.5"
    assert lines[2] == ",NaN"


def test_render_json_replaces_nan_with_null():
    spec = sweep_from_config({**default_config("prob-vs-tau"), "out": "x"})
    text = _render_json(spec, ["c [1]"], [[float("nan")], [2.0]])
    doc = json.loads(text)
    assert doc["rows"] == [[None], [2.0]]
    assert doc["mode"] == "prob-vs-tau"


# --------------------------------------------------------------------------
# max distance search
# --------------------------------------------------------------------------

def test_max_distance_brackets_the_rate_crossing():
    spec = StateSpec.from_variance(50.0, d=2.0, tau=0.9, m=0, n=0)
    params = ChannelParams()
    res = max_distance(spec, params, 1e-4)
    assert not res.capped
    # the returned distance must straddle the target within the 0.01 km grid
    assert keyrate(spec, ChannelParams(L_AC=res.km - 0.01)).K >= 1e-4
    assert keyrate(spec, ChannelParams(L_AC=res.km + 0.01)).K < 1e-4


def test_max_distance_caps_when_target_unreachable():
    spec = StateSpec.from_variance(50.0, d=2.0, tau=0.9, m=0, n=0)
    res = max_distance(spec, ChannelParams(), 1.0)  # 1 bit/pulse: hopeless
    assert res == MaxDistanceResult(km=0.0, capped=True, target=1.0)


# --------------------------------------------------------------------------
# oracle validation table
# --------------------------------------------------------------------------

def test_validate_oracle_small_grid_passes():
    rows, all_passed = validate_oracle({
        "r_values": [0.2], "d_values": [0.5], "tau_values": [0.7],
        "orders": [0, 1]})
    assert len(rows) == 4
    assert all_passed
    assert all(row["max_abs_dev"] <= 1e-6 for row in rows)


def test_validate_oracle_reports_cutoff_failures():
    # an 8-level space cannot hold the beam-splitter mixing; the point must
    # fail with an error string, not crash the table
    rows, all_passed = validate_oracle({
        "r_values": [0.5], "d_values": [1.0], "tau_values": [0.7],
        "orders": [0], "cutoff": 8})
    assert not all_passed
    assert rows[0]["error"] != ""
    assert math.isnan(rows[0]["max_abs_dev"])


# --------------------------------------------------------------------------
# end-to-end CLI runs
# --------------------------------------------------------------------------

def _read_manifest(path):
    with open(str(path) + ".manifest.json") as fh:
        return json.load(fh)


def test_cli_prob_sweep_writes_data_and_manifest(tmp_path):
    out = tmp_path / "prob.csv"
    rc = main(["prob-sweep", "--out", str(out),
               "--set", "axis1.count=4", "--set", "states=[[0,0],[1,1]]"])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("state [label],m [photons],n [photons],tau")
    assert len(lines) == 1 + 4 * 2
    manifest = _read_manifest(out)
    assert manifest["rows"] == 8
    assert manifest["failures"] == []
    assert manifest["tool_version"] == "0.1.0"
    import hashlib
    assert manifest["data_sha256"] == hashlib.sha256(out.read_bytes()).hexdigest()


def test_cli_keyrate_sweep_honest_failure_rows(tmp_path):
    # v_a = 1 has no modulation at all; that point must become NaN cells
    # plus a manifest entry, never a crash or a silent drop
    out = tmp_path / "rate.csv"
    rc = main(["keyrate", "--out", str(out),
               "--set", "axis1={\"name\":\"v_a\",\"start\":1.0,\"stop\":2.0,\"count\":3}",
               "--set", "states=[[0,0]]"])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 4
    assert "NaN" in lines[1]
    manifest = _read_manifest(out)
    assert manifest["rows"] == 3
    assert len(manifest["failures"]) == 1
    assert manifest["failures"][0]["point"]["axis1"] == 1.0


def test_cli_reruns_are_byte_identical(tmp_path):
    args = ["keyrate", "--set", "axis1.count=5", "--set", "axis1.stop=20.0",
            "--set", 'states=["tmsv",[0,1]]']
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (_read_manifest(out1)["data_sha256"]
            == _read_manifest(out2)["data_sha256"])


def test_cli_seedless_flag_verifies_and_records(tmp_path):
    out = tmp_path / "seedless.csv"
    rc = main(["keyrate", "--out", str(out), "--seedless",
               "--set", "axis1.count=3", "--set", "axis1.stop=10.0",
               "--set", "states=[[0,0]]"])
    assert rc == 0
    assert _read_manifest(out)["seedless_verified"] is True


def test_cli_grid_emits_complete_grid_with_extras(tmp_path):
    out = tmp_path / "grid.csv"
    rc = main(["grid", "--out", str(out),
               "--set", "axis1={\"name\":\"d\",\"start\":0.5,\"stop\":2.0,\"count\":2}",
               "--set", "axis2={\"name\":\"L_AC\",\"start\":0.0,\"stop\":20.0,\"count\":3}"])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    header = lines[0].split(",")
    assert header[-2] == "max_distance [km]"
    assert header[-1] == "I_minus_chi_beta1_L50 [bits/pulse]"
    assert len(lines) == 1 + 2 * 3          # complete d x L grid, one state
    # the per-d extras repeat along the L axis
    cells = list(csv.reader(io.StringIO(out.read_text())))[1:]
    assert cells[0][-2] == cells[1][-2] == cells[2][-2]
    assert float(cells[0][-2]) > 10.0


def test_cli_max_distance_to_stdout(capsys):
    rc = main(["max-distance", "--set", 'states=[[0,0],"tmsv"]'])
    assert rc == 0
    outp = capsys.readouterr().out
    lines = outp.strip().split("\n")
    assert lines[0].startswith("state [label]")
    assert len(lines) == 3
    rows = list(csv.reader(io.StringIO(outp)))[1:]
    km = {row[0]: float(row[5]) for row in rows}
    assert km["(0,0)-CTMSC"] > 60.0
    assert km["TMSV"] < km["(0,0)-CTMSC"]


def test_cli_max_distance_to_file(tmp_path):
    out = tmp_path / "md.csv"
    rc = main(["max-distance", "--out", str(out),
               "--set", "states=[[0,0]]", "--set", "target_keyrate=1e-3"])
    assert rc == 0
    assert out.exists()
    manifest = _read_manifest(out)
    assert manifest["mode"] == "max-distance"
    assert manifest["config"]["target_keyrate"] == 1e-3


def test_cli_noise_sweep_runs(tmp_path):
    out = tmp_path / "eta.csv"
    rc = main(["noise-sweep", "--out", str(out),
               "--set", "axis1.count=3", "--set", "states=[[0,1]]"])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 4
    assert lines[0].split(",")[3] == "eta [1]"


def test_cli_cov_dump_json_document(tmp_path):
    out = tmp_path / "cov.json"
    rc = main(["cov-dump", "--out", str(out),
               "--set", 'states=[[0,1],"tmsv"]'])
    assert rc == 0
    docs = json.loads(out.read_text())
    assert len(docs) == 2
    assert docs[0]["spec"]["family"] == "PSTMSC"
    assert docs[1]["spec"]["family"] == "TMSV"
    assert len(docs[0]["sigma"]) == 4
    assert docs[1]["probability"] == 1.0


def test_cli_cov_dump_csv_table(tmp_path):
    out = tmp_path / "cov.csv"
    rc = main(["cov-dump", "--out", str(out), "--format", "csv",
               "--set", "states=[[1,0]]"])
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines[0].split(",")) == 4 + 4 + 16
    assert len(lines) == 2


def test_cli_validate_passes_on_small_grid(tmp_path):
    out = tmp_path / "val.csv"
    rc = main(["validate", "--out", str(out),
               "--set", "oracle.r_values=[0.2]",
               "--set", "oracle.d_values=[0.5]",
               "--set", "oracle.tau_values=[0.7]",
               "--set", "oracle.orders=[0,1]"])
    assert rc == 0
    manifest = _read_manifest(out)
    assert manifest["config"]["all_passed"] is True
    assert manifest["rows"] == 4


def test_cli_validate_exit_3_on_failure(tmp_path, capsys):
    out = tmp_path / "val.csv"
    rc = main(["validate", "--out", str(out),
               "--set", "oracle.r_values=[0.5]",
               "--set", "oracle.d_values=[1.0]",
               "--set", "oracle.tau_values=[0.7]",
               "--set", "oracle.orders=[0]",
               "--set", "oracle.cutoff=8"])
    assert rc == 3
    assert "validation failed" in capsys.readouterr().err
    assert _read_manifest(out)["config"]["all_passed"] is False


# --------------------------------------------------------------------------
# exit codes
# --------------------------------------------------------------------------

def test_cli_usage_errors_exit_1(tmp_path, capsys):
    assert main(["prob-sweep"]) == 1                      # no --out
    assert main(["prob-sweep", "--out", str(tmp_path / "x.csv"),
                 "--set", "axis1.name=bogus"]) == 1
    assert main(["prob-sweep", "--out", str(tmp_path / "x.csv"),
                 "--set", "broken"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["prob-sweep", "--out", str(tmp_path / "x.csv"),
                 "--config", str(bad)]) == 1
    err = capsys.readouterr().err
    assert err.count("usage error") == 4


def test_cli_unknown_subcommand_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_cli_numerical_errors_exit_2(tmp_path, monkeypatch, capsys):
    # per-point failures become NaN rows; only a model-level violation is
    # allowed to abort the run, and it must map to exit code 2
    import cvmdi.cli_scan as cli

    def explode(spec):
        raise PhysicalityError("covariance turned unphysical")

    monkeypatch.setattr(cli, "run_sweep", explode)
    rc = main(["keyrate", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "numerical error" in capsys.readouterr().err
