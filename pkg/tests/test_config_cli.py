import json
import textwrap
from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from nexpflow import ConfigError
from nexpflow.cli import HELP, build_parser, main
from nexpflow.config import COMMANDS, ExperimentConfig, load_config, parse_config

CONFIGS = sorted(Path(__file__).resolve().parent.parent.joinpath("configs").glob("*.ini"))

BASE = """\
command = {command}

[system]
kind = {kind}
{sysparams}

[flow]
T = {T}
h = 1/4

[check]
delta_grid = {grid}
{extra}
"""


def cfg_text(command="index-flow", kind="odometer", sysparams="K = 3", T="1",
             grid="1/8, 1/4", extra=""):
    return BASE.format(command=command, kind=kind, sysparams=sysparams, T=T, grid=grid,
                       extra=extra)


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- parsing ----------------------------------------------------------------------------------

@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_shipped_configs_parse_and_round_trip(path):
    cfg = load_config(path)
    assert cfg.command in COMMANDS
    assert parse_config(cfg.to_text()) == cfg


def test_parse_values():
    cfg = parse_config(cfg_text(extra="eps = 3/10\nconstant = half"))
    assert cfg.T == 1 and cfg.h == F(1, 4) and cfg.grid_size == 4
    assert cfg.delta_grid == [0.125, 0.25]
    assert cfg.eps == 0.3 and cfg.constant == "half"
    assert cfg.system == {"kind": "odometer", "K": 3} and cfg.K == 3


@pytest.mark.parametrize("text,field", [
    (cfg_text(grid=""), "delta_grid"),
    (cfg_text(grid="1/4, 1/8"), "delta_grid"),
    (cfg_text(grid="0, 1/8"), "delta_grid"),
    (cfg_text(grid="1/8, x"), "delta_grid"),
    (cfg_text(command="fly"), "command"),
    (cfg_text(kind="torus"), "system"),
    (cfg_text(sysparams=""), "system"),
    (cfg_text(T="1/3"), "T"),
    (cfg_text(extra="constant = triple"), "constant"),
    (cfg_text(extra="[conjugacy]\nwitness = magic"), "witness"),
    (cfg_text(command="suspend-check", extra="eps = 1/2"), "eps"),
    (cfg_text(command="frechet", extra="[frechet]\np = 3"), "p"),
    ("[system]\nkind = odometer\nK = 3\n", "command"),
    ("command = index-map\n", "system"),
    ("command = index-map\n[system\n", "config"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


@given(command=st.sampled_from(COMMANDS),
       K=st.integers(1, 4),
       grid=st.lists(st.fractions(F(1, 64), F(1, 2), max_denominator=64), min_size=1,
                     max_size=5, unique=True),
       T=st.integers(0, 3), g=st.sampled_from([None, 4, 8]),
       constant=st.sampled_from(["double", "half"]),
       eps_seg=st.sampled_from([None, F(1, 4), F(1, 2)]),
       seed=st.integers(0, 10 ** 6))
def test_round_trip_property(command, K, grid, T, g, constant, eps_seg, seed):
    cfg = ExperimentConfig(command=command, system={"kind": "odometer", "K": K}, T=F(T),
                           g=g, delta_grid=[float(d) for d in sorted(grid)],
                           constant=constant, eps_seg=eps_seg, seed=seed).validate()
    assert parse_config(cfg.to_text()) == cfg


# -- command line ------------------------------------------------------------------------------

def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in COMMANDS:
        assert name in out
    assert set(HELP) == set(COMMANDS)


def test_unknown_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["launch", "--config", "x.ini"])
    assert info.value.code == 2


def test_index_map_report(tmp_path):
    path = write(tmp_path, cfg_text(command="index-map", kind="convergent_fixed_points",
                                    sysparams="L = 5", T="2", grid="1/25, 3/10"))
    out = tmp_path / "out"
    assert main(["index-map", "--config", path, "--out", str(out)]) == 0
    body = json.loads((out / "index_map.json").read_text())
    assert body["schema_version"] == 1
    curve = body["curves"][0]
    assert [e["index"] for e in curve["entries"]] == [3, 6]
    assert body["fixed_points"]["violation"] is True
    assert body["classification"]["N"] == 3
    assert body["classification"]["statement"].startswith("3-expansive at resolution (")
    assert (out / "index_map_base.csv").read_text().startswith("delta,index,K,H,witness_center")
    assert (out / "index_map.png").exists()
    meta = json.loads((out / "index_map.meta.json").read_text())
    assert meta["workers"] == 1


def test_no_figures_flag(tmp_path):
    path = write(tmp_path, cfg_text())
    out = tmp_path / "out"
    assert main(["index-flow", "--config", path, "--out", str(out), "--no-figures"]) == 0
    assert not (out / "index_flow.png").exists()
    assert (out / "index_flow_flow.csv").exists()


def test_suspend_check_exit_codes(tmp_path):
    text = cfg_text(command="suspend-check", kind="convergent_fixed_points", sysparams="L = 5",
                    T="2", grid="1/32, 1/16, 1/8, 1/4", extra="eps = 2/5\nconstant = {c}")
    out = str(tmp_path / "out")
    double = write(tmp_path, text.format(c="double"), "double.ini")
    half = write(tmp_path, text.format(c="half"), "half.ini")
    assert main(["suspend-check", "--config", double, "--out", out, "--no-figures"]) == 2
    assert main(["suspend-check", "--config", half, "--out", out, "--no-figures"]) == 0


def test_frechet_prints_tables(tmp_path, capsys):
    text = textwrap.dedent("""\
        command = frechet
        [system]
        kind = convergent_fixed_points
        L = 3
        [flow]
        T = 1/2
        h = 1/4
        [frechet]
        p = 1@0
        q = 1@0
    """)
    path = write(tmp_path, text)
    assert main(["frechet", "--config", path, "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "aligned distance = 0" in out
    assert "staircase: (-2,-2) (-1,-1) (0,0) (1,1) (2,2)" in out


def test_bad_config_exits_1(tmp_path, capsys):
    path = write(tmp_path, cfg_text(grid=""))
    assert main(["index-flow", "--config", path]) == 1
    assert "delta_grid" in capsys.readouterr().err


def test_bad_worker_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NEXPFLOW_WORKERS", "many")
    path = write(tmp_path, cfg_text())
    assert main(["index-flow", "--config", path, "--out", str(tmp_path / "o")]) == 1


def test_report_bodies_are_deterministic(tmp_path):
    path = write(tmp_path, cfg_text(grid="1/16, 1/8, 1/4"))
    bodies = []
    for k, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{k}"
        assert main(["index-flow", "--config", path, "--out", str(out), "--workers", workers,
                     "--no-figures"]) == 0
        bodies.append((out / "index_flow.json").read_bytes())
    assert bodies[0] == bodies[1] == bodies[2]


def test_parser_defaults():
    args = build_parser().parse_args(["sections-check", "--config", "c.ini"])
    assert args.workers is None and not args.verbose and not args.no_figures
