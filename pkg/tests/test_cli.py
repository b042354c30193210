"""Command-line entry points: exit codes, config resolution, artifacts."""

import json
import math

import pytest

import bn6
from bn6.cli import (
    RunConfig,
    main,
    parse_config_file,
    parse_eps_grid,
    resolve_config,
    build_parser,
)
from bn6.errors import ConfigError


def run(*argv):
    return main(list(argv))


# ---------------------------------------------------------------- exit codes

def test_no_command_exits_3_with_usage(capsys):
    assert run() == 3
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_command_exits_3_with_usage(capsys):
    assert run("frobnicate") == 3
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_config_key_exits_3(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus_key = 1\n")
    assert run("constants", "--config", str(cfg)) == 3
    assert "bogus_key" in capsys.readouterr().err


def test_solver_failure_exits_2(tmp_path, capsys):
    # below the existence window the matching condition never changes sign
    code = run("ground-state", "--N", "3", "--lambda", "2.2",
               "--out", str(tmp_path))
    assert code == 2
    assert capsys.readouterr().err.strip()


def test_missing_required_lambda_exits_3(tmp_path):
    assert run("ground-state", "--N", "3", "--out", str(tmp_path)) == 3


# ---------------------------------------------------------- config handling

def test_parse_config_file_aliases_and_comments(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "n = 3\n"
        "lambda = 5.0\n"
        "grid-n = 512   # inline comment\n"
        "format = json\n"
        "\n")
    got = parse_config_file(str(cfg))
    assert got == {"dimension": 3, "lam": 5.0, "grid_n": 512,
                   "format": "json"}


def test_parse_config_file_rejects_bad_value(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid_n = many\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(cfg))


def test_parse_config_file_rejects_bad_format(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("format = yaml\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(cfg))


def test_cli_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 3\nm = 2\n")
    args = build_parser().parse_args(
        ["branch", "--config", str(cfg), "--m", "3"])
    resolved = resolve_config(args)
    assert resolved.dimension == 3
    assert resolved.m == 3


def test_parse_eps_grid():
    got = parse_eps_grid("0.2:0.5:4")
    assert got == pytest.approx((0.2, 0.1, 0.05, 0.025))
    assert parse_eps_grid(None) is None
    for bad in ("0.2:0.5", "a:b:c", "0.2:0.5:0", "-0.1:0.5:3"):
        with pytest.raises(ConfigError):
            parse_eps_grid(bad)


def test_out_directory_falls_back_to_env(monkeypatch, tmp_path):
    monkeypatch.setenv("BN6_OUT", str(tmp_path))
    assert RunConfig().resolved_out() == str(tmp_path)
    monkeypatch.delenv("BN6_OUT")
    assert RunConfig().resolved_out() == "."
    assert RunConfig(out="x").resolved_out() == "x"


# ------------------------------------------------------------ artifacts

def read(path):
    return path.read_bytes()


def test_constants_artifact_and_determinism(tmp_path):
    out = tmp_path / "run"
    assert run("constants", "--lambda", "22.469107870851314",
               "--out", str(out)) == 0
    first = read(out / "constants.json")
    payload = json.loads(first)
    assert payload["alpha6"] == 24.0
    assert payload["omega6"] == pytest.approx(math.pi ** 3, rel=1e-15)
    assert payload["d1"] == pytest.approx(96.0 * math.pi ** 3, rel=1e-12)
    assert payload["provenance"]["version"] == bn6.__version__
    assert payload["provenance"]["config"]["dimension"] == 6
    assert payload["provenance"]["config"]["command"] == "constants"
    # identical invocation reproduces identical bytes
    assert run("constants", "--lambda", "22.469107870851314",
               "--out", str(out)) == 0
    assert read(out / "constants.json") == first


def test_ground_state_artifacts(tmp_path):
    out = tmp_path / "gs"
    assert run("ground-state", "--N", "3", "--lambda", "5.0",
               "--out", str(out)) == 0
    csv = (out / "ground_state_profile.csv").read_text().splitlines()
    comments = [ln for ln in csv if ln.startswith("#")]
    body = [ln for ln in csv if not ln.startswith("#")]
    assert comments[0].startswith("# bn6 ")
    assert any(ln == "# command = ground-state" for ln in comments)
    assert body[0] == "r,value,derivative"
    r0, v0, d0 = body[1].split(",")
    assert float(r0) == 0.0
    assert float(d0) == 0.0

    meta = json.loads(read(out / "ground_state.json"))
    assert meta["N"] == 3
    assert meta["nodal_count"] == 1
    assert 0.0 < meta["lambda"] < math.pi ** 2
    assert meta["residual"] <= 1e-6
    assert float(v0) == pytest.approx(meta["amplitude"], rel=1e-12)

    # byte determinism for the solver output as well
    first = read(out / "ground_state_profile.csv")
    assert run("ground-state", "--N", "3", "--lambda", "5.0",
               "--out", str(out)) == 0
    assert read(out / "ground_state_profile.csv") == first


def test_json_format_adds_row_twin(tmp_path):
    out = tmp_path / "twin"
    assert run("ground-state", "--N", "3", "--lambda", "5.0",
               "--out", str(out), "--format", "json") == 0
    # the pinned CSV is written regardless of the requested format
    assert (out / "ground_state_profile.csv").exists()
    twin = json.loads(read(out / "ground_state_profile.rows.json"))
    assert twin["rows"][0]["r"] == 0.0
    assert set(twin["rows"][0]) == {"r", "value", "derivative"}


def test_branch_artifacts(tmp_path):
    cfg = tmp_path / "short.cfg"
    cfg.write_text("n = 3\nm = 1\na_end = 16\n")
    out = tmp_path / "br"
    assert run("branch", "--config", str(cfg), "--out", str(out)) == 0
    csv = (out / "branch_N3_m1.csv").read_text().splitlines()
    body = [ln for ln in csv if not ln.startswith("#")]
    assert body[0] == "amplitude,lambda,residual"
    assert len(body) == 1 + 5  # schedule 1,2,4,8,16
    meta = json.loads(read(out / "branch_N3_m1.json"))
    assert len(meta["points"]) == 5
    assert meta["points"][0]["nodal_count"] == 1
    assert meta["diagnostics"] == []


def test_limits_artifacts(tmp_path):
    cfg = tmp_path / "lim.cfg"
    cfg.write_text("n = 3\nm = 1\na_end = 256\n")
    out = tmp_path / "lim"
    assert run("limits", "--config", str(cfg), "--out", str(out)) == 0
    est = json.loads(read(out / "limits_N3_m1.json"))
    assert est["model"] in ("power", "log")
    assert est["lam_infinity"] == pytest.approx(math.pi ** 2 / 4.0, rel=0.08)
    assert len(est["tail"]) == 8
    assert (out / "limits_N3_m1_branch.csv").exists()
