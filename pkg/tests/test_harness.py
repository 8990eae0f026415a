import json
import os
from pathlib import Path

import numpy as np
import pytest
import yaml

from wlanbw.harness.cli import main
from wlanbw.harness.config import ConfigError, list_presets, load_config, load_preset, parse_config
from wlanbw.harness.csvio import SCHEMAS, SchemaError, fmt, read_csv, write_csv
from wlanbw.harness.plotting import emit_plot
from wlanbw.harness.runner import run_experiment

GOLDEN = Path(__file__).parent / "golden"

SMALL_IID = {
    "name": "tiny-iid",
    "kind": "iid-trains",
    "seed": 3,
    "reps": 500,
    "service": {"kind": "exponential", "mean_us": 3428.571},
    "sweep": {"train_lengths": [2, 5], "rates_bps": [2e6, 3.5e6, 6e6]},
}

SMALL_DCF = {
    "name": "tiny-dcf",
    "kind": "dcf-transitory",
    "seed": 4,
    "reps": 40,
    "dcf": {
        "probe": {"n": 30, "rate_bps": 5e6},
        "contenders": [{"rate_bps": 4e6, "arrival": "poisson"}],
    },
    "analysis": {"tail": 10},
}


def write_yaml(tmp_path, raw, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return p


# -- CSV --------------------------------------------------------------------------


@pytest.mark.parametrize("schema", ["curve", "transitory", "gap"])
def test_golden_headers(tmp_path, schema):
    out = write_csv(tmp_path / "x.csv", schema, [])
    assert out.read_text() == (GOLDEN / f"{schema}_header.csv").read_text()


def test_fmt_is_locale_free():
    assert fmt(1234567.5) == "1234567.5"
    assert fmt(np.int64(7)) == "7"
    assert fmt(float("nan")) == "" and fmt(None) == ""
    assert fmt(float("inf")) == "inf"
    assert "," not in fmt(1e9)


def test_csv_round_trip(tmp_path):
    p = write_csv(tmp_path / "g.csv", "gap", [(1000.0, 1100.5, 2.0, "mean_to_max")])
    schema, rows = read_csv(p)
    assert schema == "gap" and rows[0]["mean_gO_us"] == 1100.5 and rows[0]["region"] == "mean_to_max"


def test_csv_errors(tmp_path):
    with pytest.raises(SchemaError):
        write_csv(tmp_path / "bad.csv", "gap", [(1.0, 2.0)])
    (tmp_path / "other.csv").write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_csv(tmp_path / "other.csv")
    p = write_csv(tmp_path / "c.csv", "curve", [(1, 1, 0, 1, None, None)])
    with pytest.raises(SchemaError):
        read_csv(p, expect="transitory")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(SchemaError):
        read_csv(tmp_path / "empty.csv")


# -- config ------------------------------------------------------------------------


def test_presets_listed_and_loadable():
    names = [n for n, _ in list_presets()]
    for expected in ["fig3-mean-delay", "fig4-histograms", "fig5-ks-queue", "fig6-ks-queue", "fig7-ks-queue",
                     "fig9-no-contention", "fig7-fluid-curve", "fig11-iid-trains", "fig12-delta-z",
                     "fig13-wlan-trains", "fig15-packet-pair", "fig16-trimming"]:
        assert expected in names
        load_preset(expected)
    trim = load_preset("fig16-trimming")
    assert [50, 30] in trim.sweep["strategies"]
    pair = load_preset("fig15-packet-pair")
    assert len(pair.sweep["cross_rates_bps"]) > 2


def test_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        load_preset("nope")


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"reps": 0}, "reps"),
        ({"kind": "bogus"}, "kind"),
        ({"extra": 1}, "extra"),
        ({"sweep": {"rates_bps": [3e6, 2e6]}}, "sweep.rates_bps"),
        ({"sweep": {"rates_bps": [-1.0]}}, "sweep.rates_bps"),
        ({"service": {"kind": "gamma"}}, "service.kind"),
        ({"service": {"kind": "exponential"}}, "service.mean_us"),
        ({"trim": -1}, "trim"),
    ],
)
def test_config_errors_name_the_field(patch, field):
    raw = {**SMALL_IID, **patch}
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(raw)


def test_dcf_config_errors_name_the_field():
    raw = {**SMALL_DCF, "dcf": {"probe": {"n": 1, "rate_bps": 5e6}}}
    with pytest.raises(ConfigError, match=r"dcf\.probe"):
        parse_config(raw)
    raw = {**SMALL_DCF, "dcf": {"probe": {"n": 10, "rate_bps": 5e6}, "contenders": [{"arrival": "burst"}]}}
    with pytest.raises(ConfigError, match=r"dcf\.contenders\[0\]"):
        parse_config(raw)


def test_load_config_rejects_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_rate_grid_with_extra_rate():
    cfg = load_preset("fig11-iid-trains")
    rates = cfg.rates()
    assert 3.5e6 in rates and rates == sorted(set(rates))


# -- runs ----------------------------------------------------------------------------


def test_run_is_byte_deterministic(tmp_path):
    cfg = parse_config(SMALL_IID)
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["config"]["kind"] == "iid-trains"
    assert "version" in manifest and set(manifest["files"]) == {f for f in files if f.endswith(".csv")}


def test_dcf_run_writes_transitory_schema(tmp_path):
    out = run_experiment(parse_config(SMALL_DCF), tmp_path / "d")
    schema, rows = read_csv(out / "transitory.csv")
    assert schema == "transitory" and len(rows) == 30
    assert rows[0]["index"] == 1.0


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    from wlanbw.harness.runner import RunError

    with pytest.raises(RunError):
        run_experiment(parse_config(SMALL_IID), blocker / "sub")


# -- plots ------------------------------------------------------------------------------


def test_curve_plot_has_fluid_overlay_and_units(tmp_path):
    out = run_experiment(parse_config(SMALL_IID), tmp_path / "p")
    svg = emit_plot(out / "curve_n2.csv").read_text()
    assert "fluid" in svg and "Mbps" in svg
    assert emit_plot(out / "curve_n2.csv").read_bytes() == emit_plot(out / "curve_n2.csv").read_bytes()


def test_plot_schema_mismatch(tmp_path):
    p = write_csv(tmp_path / "c.csv", "curve", [(1e6, 1e6, 0.0, 1e6, None, None)])
    with pytest.raises(SchemaError):
        emit_plot(p, kind="transitory")
    empty = write_csv(tmp_path / "e.csv", "curve", [])
    with pytest.raises(SchemaError):
        emit_plot(empty)


# -- CLI ----------------------------------------------------------------------------------


def test_cli_list_presets(capsys):
    assert main(["list-presets"]) == 0
    assert "fig16-trimming" in capsys.readouterr().out


def test_cli_run_with_overrides(tmp_path, capsys):
    cfg = write_yaml(tmp_path, SMALL_IID)
    assert main(["run", "--config", str(cfg), "--seed", "9", "--reps", "50", "--out", str(tmp_path / "o"), "--plot"]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 9 and manifest["config"]["reps"] == 50
    assert (tmp_path / "o" / "curve_n2.svg").exists()


def test_cli_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("WLANBW_OUTPUT_ROOT", str(tmp_path / "root"))
    cfg = write_yaml(tmp_path, SMALL_IID)
    assert main(["run", "--config", str(cfg), "--reps", "20"]) == 0
    assert (tmp_path / "root" / "tiny-iid" / "manifest.json").exists()


def test_cli_trim_override(tmp_path):
    cfg = write_yaml(tmp_path, SMALL_IID)
    assert main(["run", "--config", str(cfg), "--trim", "1"]) == 2
    raw = {**SMALL_IID, "sweep": {"train_lengths": [5, 8], "rates_bps": [2e6, 6e6]}}
    cfg = write_yaml(tmp_path, raw, "long.yaml")
    assert main(["run", "--config", str(cfg), "--reps", "20", "--trim", "1", "--out", str(tmp_path / "t")]) == 0
    schema, rows = read_csv(tmp_path / "t" / "curve_n5.csv")
    assert rows[0]["bound_lo_bps"] != rows[0]["bound_lo_bps"]  # NaN: no bounds for trimmed trains


def test_cli_exit_codes(tmp_path, capsys):
    bad = write_yaml(tmp_path, {**SMALL_IID, "reps": -3})
    assert main(["run", "--config", str(bad)]) == 2
    assert "reps" in capsys.readouterr().err
    assert main(["run", "--preset", "missing"]) == 2
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 2
    good = write_yaml(tmp_path, SMALL_IID, "good.yaml")
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", "--config", str(good), "--out", str(blocker / "x")]) == 3
    p = write_csv(tmp_path / "c.csv", "curve", [(1e6, 1e6, 0.0, 1e6, None, None)])
    assert main(["plot", str(p), "--kind", "gap"]) == 2
    assert main(["plot", str(p), "--out", str(tmp_path / "c.svg")]) == 0


def test_cli_reps_override_rejects_zero(tmp_path):
    cfg = write_yaml(tmp_path, SMALL_IID)
    assert main(["run", "--config", str(cfg), "--reps", "0"]) == 2
