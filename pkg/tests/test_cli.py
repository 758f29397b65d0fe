"""End-to-end command line behaviour: train, analyze, retrain, report, generate."""

import json
import subprocess
import sys

import numpy as np
import pytest

from terc import report as rpt
from terc.cli import main
from terc.config import ConfigError, config_hash, load_config
from terc.data import TrajectoryBatch, meta_path
from terc.envs import CartPole
from terc.rl import Recorder

IPD_CFG = """\
[run]
seed = 1

[env]
name = ipd
n = 3
history = {history}
rounds = 100

[agent]
kind = q
episodes = 40

[analysis]
estimator = plugin
algorithm = alg2
"""


@pytest.fixture
def ipd_cfg(tmp_path):
    def make(history=9, name="run.cfg"):
        p = tmp_path / name
        p.write_text(IPD_CFG.format(history=history))
        return p
    return make


@pytest.fixture(scope="module")
def four_redundant(tmp_path_factory):
    d = tmp_path_factory.mktemp("fr")
    data = d / "four.csv"
    assert main(["generate", "--kind", "four_redundant", "--n", "10000", "--seed", "0", "-o", str(data)]) == 0
    out = d / "report.json"
    assert main(["analyze", "-i", str(data), "--alg", "alg2", "--estimator", "plugin", "-o", str(out)]) == 0
    return data, out


# ---------------------------------------------------------------------------
# train


def test_train_writes_trajectories_and_echoes_config_hash(tmp_path, ipd_cfg, monkeypatch):
    monkeypatch.delenv("TERC_SEED", raising=False)
    cfg = ipd_cfg()
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "out")]) == 0
    traj = tmp_path / "out" / "trajectories.jsonl"
    meta = json.loads(meta_path(traj).read_text())
    assert meta["config_hash"] == load_config(cfg).hash
    assert meta["seed"] == 1 and meta["var_names"][0] == "X1" and len(meta["var_names"]) == 9
    assert (tmp_path / "out" / "qtable.json").exists()
    batch = TrajectoryBatch.read_jsonl(traj)
    assert len(batch) == 40 * 100


def test_train_is_byte_identical_for_same_config(tmp_path, ipd_cfg, monkeypatch):
    monkeypatch.delenv("TERC_SEED", raising=False)
    cfg = ipd_cfg()
    for d in ("a", "b"):
        assert main(["train", "-c", str(cfg), "-o", str(tmp_path / d)]) == 0
    for name in ("trajectories.jsonl", "trajectories.meta.json", "qtable.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_history_zero_is_a_config_error(tmp_path, ipd_cfg, capsys):
    code = main(["train", "-c", str(ipd_cfg(history=0)), "-o", str(tmp_path / "o")])
    assert code == 2
    assert "history" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("text, field", [
    ("[env]\nname = nope\n", "env.name"),
    ("[env]\nname = ipd\nbogus = 1\n", "env.bogus"),
    ("[agent]\nkind = q\n", "agent.episodes"),
    ("[analysis]\nalgorithm = alg9\n", "analysis.algorithm"),
    ("[weird]\nx = 1\n", "weird"),
    ("[run]\nseed = abc\n", "seed"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        load_config(text=text, environ={})


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["train", "-c", str(tmp_path / "none.cfg"), "-o", str(tmp_path)]) == 2
    assert "does not exist" in capsys.readouterr().err


def test_terc_seed_overrides_config(tmp_path, ipd_cfg, monkeypatch):
    monkeypatch.setenv("TERC_SEED", "5")
    assert load_config(ipd_cfg()).seed == 5
    assert main(["train", "-c", str(ipd_cfg()), "-o", str(tmp_path / "o")]) == 0
    assert json.loads(meta_path(tmp_path / "o" / "trajectories.jsonl").read_text())["seed"] == 5


def test_config_hash_is_stable_and_order_free():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


# ---------------------------------------------------------------------------
# analyze


def test_analyze_four_redundant_selects_oracle_set(four_redundant):
    data, out = four_redundant
    rep = json.loads(out.read_text())
    assert rep["schema"] == rpt.SCHEMA
    assert rep["selection"]["selected"] == ["X2", "X3", "X6"]
    assert {r["variable"] for r in rep["variables"]} == {f"X{i}" for i in range(1, 7)}
    assert rep["input"]["blake2b"] == rpt.file_digest(data)
    assert set(rep["provenance"]) == {"config_hash", "seeds", "versions"}
    for ext in (".csv", ".dot"):
        assert out.with_suffix(ext).exists()


def test_analyze_is_byte_identical(four_redundant, tmp_path):
    data, out = four_redundant
    again = tmp_path / "again.json"
    assert main(["analyze", "-i", str(data), "--alg", "alg2", "--estimator", "plugin", "-o", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()
    assert again.with_suffix(".csv").read_bytes() == out.with_suffix(".csv").read_bytes()


def test_report_values_are_recomputable(four_redundant):
    from terc.data import SampleTable
    from terc.estimators import phi_measure

    data, out = four_redundant
    rep = json.loads(out.read_text())
    table = SampleTable.from_csv(data)
    for row in rep["variables"]:
        est = phi_measure(table, [row["variable"]], table.variables, "plugin")
        assert est.mean == row["phi_mean"]


def test_analyze_ipd_quartiles_and_plotdata(tmp_path, ipd_cfg, monkeypatch):
    monkeypatch.delenv("TERC_SEED", raising=False)
    cfg = ipd_cfg()
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path)]) == 0
    out = tmp_path / "report.json"
    assert main(["analyze", "-i", str(tmp_path / "trajectories.jsonl"), "-c", str(cfg), "--quartiles",
                 "-o", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert [q["quartile"] for q in rep["quartiles"]] == [1, 2, 3, 4]
    assert sum(q["rows"] for q in rep["quartiles"]) == rep["rows"]
    plot = tmp_path / "plot.csv"
    assert main(["report", "-i", str(out), "-f", "plotdata", "-o", str(plot)]) == 0
    lines = plot.read_text().strip().split("\n")
    assert lines[0].split(",") == list(rpt.PLOT_FIELDS)
    assert len(lines) - 1 == 9 * 4


def test_plotdata_without_quartiles_is_an_error(four_redundant, capsys):
    _, out = four_redundant
    assert main(["report", "-i", str(out), "-f", "plotdata"]) == 2
    assert "--quartiles" in capsys.readouterr().err


def test_quartiles_on_csv_input_is_a_config_error(four_redundant, tmp_path):
    data, _ = four_redundant
    assert main(["analyze", "-i", str(data), "--quartiles", "-o", str(tmp_path / "r.json")]) == 2


def test_missing_input_exits_2(tmp_path):
    assert main(["analyze", "-i", str(tmp_path / "nope.jsonl"), "-o", str(tmp_path / "r.json")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_estimator_failure_marks_report_and_exits_3(tmp_path, four_redundant):
    data, _ = four_redundant
    cfg = tmp_path / "div.cfg"
    cfg.write_text("[analysis]\nestimator = mine\noptimizer = sgd\nlr = 1e200\niters = 5\n")
    out = tmp_path / "r.json"
    with np.errstate(all="ignore"):
        code = main(["analyze", "-i", str(data), "-c", str(cfg), "-o", str(out)])
    assert code == 3
    rep = json.loads(out.read_text())
    assert rep["failures"] and rep["selection"] is None


def test_baseline_section_in_report(tmp_path):
    data = tmp_path / "tt.csv"
    assert main(["generate", "--kind", "two_triplets", "--n", "2000", "--seed", "1", "-o", str(data)]) == 0
    cfg = tmp_path / "pi.cfg"
    cfg.write_text("[analysis]\npi_runs = 50\n")
    out = tmp_path / "r.json"
    assert main(["analyze", "-i", str(data), "-c", str(cfg), "--baseline", "pi", "--alg", "alg1",
                 "--tolerance", "exact", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["baseline"]["method"] == "permutation-importance"
    assert rep["baseline"]["runs"] == 50 and len(rep["baseline"]["rows"]) == 6


def test_doped_variables_not_significant_when_policy_ignores_them(tmp_path):
    """Trajectory ingestion: a controller that reads only the physical state."""
    env = CartPole(seed=3)
    rng = np.random.default_rng(3)
    rec = Recorder(env, 3, agent="noisy-pd")
    for ep in range(8):
        s = env.reset()
        done, t = False, 0
        while not done and t < 400:
            a = int(s[2] + 0.5 * s[3] + 0.05 * rng.normal() > 0)
            s2, r, done = env.step(env.action_values[a])
            rec.add(ep, t, s, a, r)
            s, t = s2, t + 1
    traj = tmp_path / "pd.jsonl"
    rec.batch().write_jsonl(traj)
    out = tmp_path / "r.json"
    assert main(["analyze", "-i", str(traj), "--estimator", "mine", "--iters", "300", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())
    sig = set(rep["significant"])
    assert not sig & {"R1", "R2", "R3"}
    assert sig & {"theta", "theta_dot"}


# ---------------------------------------------------------------------------
# retrain


def test_retrain_from_report_observes_only_significant(tmp_path, ipd_cfg, monkeypatch):
    monkeypatch.delenv("TERC_SEED", raising=False)
    rep = {"schema": rpt.SCHEMA, "significant": ["X1", "X2"], "variables": []}
    rp = tmp_path / "r.json"
    rp.write_text(json.dumps(rep))
    assert main(["retrain", "-c", str(ipd_cfg()), "--report", str(rp), "-o", str(tmp_path / "re")]) == 0
    meta = json.loads(meta_path(tmp_path / "re" / "trajectories.jsonl").read_text())
    assert meta["var_names"] == ["X1", "X2"]
    assert meta["config"]["env"]["keep"] == ["X1", "X2"]
    assert meta["env"]["observed"] == ["X1", "X2"]


def test_retrain_rejects_unknown_or_empty(tmp_path, ipd_cfg):
    assert main(["retrain", "-c", str(ipd_cfg()), "--keep", "X1,Q7", "-o", str(tmp_path / "x")]) == 2
    rp = tmp_path / "r.json"
    rp.write_text(json.dumps({"schema": rpt.SCHEMA, "significant": [], "variables": []}))
    assert main(["retrain", "-c", str(ipd_cfg()), "--report", str(rp), "-o", str(tmp_path / "y")]) == 2


# ---------------------------------------------------------------------------
# report


def test_json_csv_json_round_trip_is_exact(four_redundant, tmp_path):
    _, out = four_redundant
    csv_path = tmp_path / "r.csv"
    assert main(["report", "-i", str(out), "-f", "csv", "-o", str(csv_path)]) == 0
    back_path = tmp_path / "back.json"
    assert main(["report", "-i", str(csv_path), "-f", "json", "-o", str(back_path)]) == 0
    orig = json.loads(out.read_text())
    back = json.loads(back_path.read_text())
    assert back["null_bound"] == orig["null_bound"]
    assert back["significant"] == orig["significant"]
    for a, b in zip(orig["variables"], back["variables"]):
        for f in rpt.CSV_FIELDS:
            assert a[f] == b[f], f


def test_dot_has_one_edge_per_significant_variable(capsys):
    rows = [{"variable": f"X{i}"} for i in range(1, 26)]
    rep = {"schema": rpt.SCHEMA, "variables": rows, "significant": ["X2", "X6", "X25"]}
    dot = rpt.render(rep, "dot")
    edges = [ln for ln in dot.splitlines() if "->" in ln]
    assert len(edges) == 3
    assert all(ln.strip().endswith('-> "A";') for ln in edges)


def test_unknown_format_exits_2(four_redundant):
    _, out = four_redundant
    with pytest.raises(SystemExit):
        main(["report", "-i", str(out)])
    assert main(["report", "-i", str(out), "-f", "xml"]) == 2


def test_report_to_stdout(four_redundant, capsys):
    _, out = four_redundant
    assert main(["report", "-i", str(out), "-f", "csv"]) == 0
    assert capsys.readouterr().out.startswith(",".join(rpt.CSV_FIELDS))


# ---------------------------------------------------------------------------
# generate / entry point


def test_generate_is_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["generate", "--kind", "two_triplets", "--n", "500", "--seed", "4",
                     "-o", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.csv"
    proc = subprocess.run([sys.executable, "-m", "terc.cli", "generate", "--n", "20", "-o", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("X1,")
