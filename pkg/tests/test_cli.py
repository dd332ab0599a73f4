import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dosm import cli, verify
from dosm.config import config_hash, example_config, validate, with_overrides
from dosm.errors import ConfigError
from dosm.evaluation import read_trace
from dosm.runner import sweep, sweep_csv
from dosm.seeding import Streams
from dosm.verify import Outcome


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# -- config ------------------------------------------------------------------


def test_example_config_valid():
    assert validate(example_config())


@pytest.mark.parametrize(
    "change",
    [
        {"bogus": 1},
        {"version": 2},
        {"T": 0},
        {"algorithm": {"reduction": "boosting", "engine": "d-ogd", "speed": 3}},
        {"algorithm": {"reduction": "none", "engine": "d-ogd"}},
        {"algorithm": {"reduction": "dmfw", "engine": "d-ftpl", "mode": "monotone"}},
        {"algorithm": {"reduction": "boosting", "engine": "d-ftpl", "role": "smooth-doco"}},
        {"set": {"kind": "box", "lower": [0.1, 0.0], "upper": [1, 1]}, "algorithm": {"reduction": "dmfw", "engine": "d-ftpl"}},
    ],
)
def test_invalid_configs(change):
    with pytest.raises(ConfigError):
        validate(with_overrides(example_config(), **change))


def test_config_hash_stable_and_seed_sensitive():
    cfg = example_config()
    assert config_hash(cfg, 1) == config_hash(json.loads(json.dumps(cfg)), 1)
    assert config_hash(cfg, 1) != config_hash(cfg, 2)
    assert len(config_hash(cfg)) == 16


def test_named_streams_independent_of_request_order():
    a = Streams(9)
    first = a.rng("rewards").random(3)
    b = Streams(9)
    b.rng("net").random(10)
    np.testing.assert_array_equal(b.rng("rewards").random(3), first)
    assert not np.array_equal(a.rng("engine.node.0").random(3), a.rng("engine.node.1").random(3))


# -- spectrum ----------------------------------------------------------------


def test_spectrum_path3(capsys):
    assert cli.main(["spectrum", "--topology", "path", "--n", "3", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rho"] == pytest.approx(1 / 6, rel=1e-10)
    assert out["sigma2"] == pytest.approx(5 / 6, rel=1e-10)
    assert set(out["defaults"]) == {"smooth-doco", "linear-doco", "dftpl", "dmfw-inner"}


def test_spectrum_single_node(capsys):
    assert cli.main(["spectrum", "--topology", "complete", "--n", "1", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["rho"] == 1.0


def test_spectrum_disconnected(tmp_path, capsys):
    edges = tmp_path / "g.txt"
    edges.write_text("0 1\n2 3\n")
    assert cli.main(["spectrum", "--edges", str(edges)]) == 2
    assert "{0, 1}, {2, 3}" in capsys.readouterr().err


def test_spectrum_from_config(tmp_path, capsys):
    assert cli.main(["spectrum", "--config", _write(tmp_path, example_config())]) == 0
    assert "sigma2=" in capsys.readouterr().out


# -- run ---------------------------------------------------------------------


def test_run_is_byte_identical(tmp_path, capsys):
    path = _write(tmp_path, example_config())
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    assert a.startswith(b"# config_hash=")
    out = capsys.readouterr().out
    assert "alpha=0.25 " in out and "final_alpha_regret=" in out and "exchanges_per_round=" in out
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["alpha"] == 0.25


def test_run_seed_override_changes_output(tmp_path):
    path = _write(tmp_path, example_config())
    cli.main(["run", "--config", path, "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["run", "--config", path, "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_single_node_monotone_matches_centralized(tmp_path):
    base = with_overrides(
        example_config(),
        n=1,
        rewards={"mode": "monotone", "noise": 0.1},
        algorithm={"reduction": "boosting", "engine": "ad-ospa", "role": "smooth-doco"},
        output={"decisions": True},
    )
    ring = with_overrides(base, topology={"kind": "ring"})
    edges = with_overrides(base, topology={"kind": "edges", "edges": []})
    cli.main(["run", "--config", _write(tmp_path, ring, "r.json"), "--out", str(tmp_path / "r")])
    cli.main(["run", "--config", _write(tmp_path, edges, "e.json"), "--out", str(tmp_path / "e")])
    strip = lambda p: p.read_text().split("\n", 1)[1]  # noqa: E731  (drop the hash line)
    assert strip(tmp_path / "r" / "trace.csv") == strip(tmp_path / "e" / "trace.csv")
    assert strip(tmp_path / "r" / "decisions.csv") == strip(tmp_path / "e" / "decisions.csv")
    cols = read_trace(tmp_path / "r" / "trace.csv")
    assert np.all(cols["consensus_err"] == 0)


def test_run_padding_warning(tmp_path, caplog):
    cfg = with_overrides(example_config(), T=250, algorithm={"reduction": "boosting", "engine": "ad-ospa"})
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    assert "nominal T=250" in caplog.text and "padded" in caplog.text


def test_run_invalid_config_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", _write(tmp_path, {"version": 1})]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run"]) == 2
    capsys.readouterr()


def test_run_runtime_failure_exit_1(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("engine exploded")

    monkeypatch.setattr("dosm.runner.simulate", boom)
    assert cli.main(["run", "--config", _write(tmp_path, example_config()), "--out", str(tmp_path)]) == 1


def test_log_level_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DOSM_LOG", "debug")
    assert cli.main(["spectrum", "--topology", "ring", "--n", "4"]) == 0


# -- sweep -------------------------------------------------------------------


def _constant(cfg, T, seed):
    return 5.0


def test_sweep_constant_regret_slope_zero():
    rows = sweep(example_config(), [64, 128, 256, 512, 1024], [0, 1], run_fn=_constant)
    assert rows[-1].slope_so_far == pytest.approx(0.0, abs=1e-12)
    assert rows[2].slope_so_far is None and rows[3].slope_so_far is not None
    text = sweep_csv(rows, "h")
    assert text.split("\n")[1] == "T,mean_final_regret,se,slope_so_far"


def test_cli_sweep_few_horizons(tmp_path, capsys):
    cfg = with_overrides(example_config(), T=64)
    assert cli.main(["sweep", "--config", _write(tmp_path, cfg), "--T", "32", "64", "--seeds", "2", "--out", str(tmp_path)]) == 0
    captured = capsys.readouterr()
    assert "slope omitted" in captured.err
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and len(lines) == 4
    assert lines[2].split(",")[3] == ""


def test_cli_sweep_parallel_matches_serial(tmp_path):
    cfg = with_overrides(example_config(), T=32)
    path = _write(tmp_path, cfg)
    cli.main(["sweep", "--config", path, "--T", "16", "32", "--seeds", "2", "--out", str(tmp_path / "s")])
    cli.main(["sweep", "--config", path, "--T", "16", "32", "--seeds", "2", "--jobs", "2", "--out", str(tmp_path / "p")])
    assert (tmp_path / "s" / "sweep.csv").read_bytes() == (tmp_path / "p" / "sweep.csv").read_bytes()


# -- verify ------------------------------------------------------------------


def test_verify_exit_codes(monkeypatch, capsys):
    assert cli.main(["verify", "gossip"]) == 0
    assert "[PASS]" in capsys.readouterr().out
    monkeypatch.setitem(verify.SUITES, "gossip", lambda scale="quick": Outcome("gossip", False, "forced"))
    assert cli.main(["verify", "gossip"]) == 1
    assert "[FAIL]" in capsys.readouterr().out


# -- plot --------------------------------------------------------------------


def test_plot_two_row_csv(tmp_path):
    csv = tmp_path / "t.csv"
    csv.write_text(
        "# config_hash=feedbeef\n"
        "round,node,algo,alpha,seed,inst_reward,cum_reward,alpha_regret,consensus_err\n"
        "1,0,demo,0.25,0,1.0,1.0,-0.5,0.0\n"
        "2,0,demo,0.25,0,2.0,3.0,2.5,0.1\n"
    )
    assert cli.main(["plot", str(csv), "--out", str(tmp_path / "t.svg")]) == 0
    text = (tmp_path / "t.svg").read_text()
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    assert "<!-- # config_hash=feedbeef -->" in text
    assert "alpha-regret" in text and "consensus error" in text
    # one marker per row on each of the two curves
    ns = {"svg": "http://www.w3.org/2000/svg"}
    for gid in ("regret-node0", "consensus-node0"):
        group = root.find(f".//svg:g[@id='{gid}']", ns)
        assert group is not None and len(group.findall(".//svg:use", ns)) == 2


def test_plot_sweep_csv_and_bad_input(tmp_path):
    csv = tmp_path / "s.csv"
    csv.write_text("T,mean_final_regret,se,slope_so_far\n64,10.0,1.0,\n128,14.0,1.5,\n")
    assert cli.main(["plot", str(csv), "--out", str(tmp_path)]) == 0
    ET.parse(tmp_path / "s.svg")
    bad = tmp_path / "b.csv"
    bad.write_text("a,b\n1,2\n")
    assert cli.main(["plot", str(bad)]) == 2
    assert cli.main(["plot", str(tmp_path / "none.csv")]) == 2


def test_plot_is_deterministic(tmp_path):
    csv = tmp_path / "s.csv"
    csv.write_text("T,mean_final_regret,se,slope_so_far\n64,10.0,1.0,\n128,14.0,1.5,\n")
    cli.main(["plot", str(csv), "--out", str(tmp_path / "a.svg")])
    cli.main(["plot", str(csv), "--out", str(tmp_path / "b.svg")])
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
