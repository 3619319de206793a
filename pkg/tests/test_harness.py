import json
import subprocess
import sys
from pathlib import Path

import pytest

from dnls_gibbs import cli, harness
from dnls_gibbs.harness import ConfigError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = sorted((ROOT / "configs").glob("*.toml"))


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


SMALL = '''experiment = "sampler_moments"
seed = 4
[params]
samples = 20000
n_max = 16
freqs = [0, 1, -3]
second_tol = 0.05
fourth_tol = 0.2
'''


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = harness.load_config(path)
    assert cfg.experiment in harness.REGISTRY


def test_every_experiment_has_a_config():
    named = {harness.load_config(p).experiment for p in CONFIGS}
    assert named == set(harness.REGISTRY)


def test_criteria_cover_one_to_ten():
    crit = sorted(e.criterion for e in harness.REGISTRY.values() if e.criterion)
    assert crit == list(range(1, 11))


@pytest.mark.parametrize("d,match", [
    ({}, "experiment"),
    ({"experiment": "nope"}, "unknown experiment"),
    ({"experiment": "sampler_moments", "colour": 1}, "unknown config keys"),
    ({"experiment": "sampler_moments", "params": {"bogus": 1}}, "unknown parameters"),
    ({"experiment": "sampler_moments", "params": {"samples": "many"}}, "integer"),
    ({"experiment": "sampler_moments", "params": {"samples": 0}}, "positive"),
    ({"experiment": "sampler_moments", "seed": -3}, "seed"),
    ({"experiment": "sampler_moments", "params": {"second_tol": True}}, "number"),
])
def test_validation_errors(d, match):
    with pytest.raises(ConfigError, match=match):
        harness.validate(d)


def test_sha_ignores_key_order_and_tracks_params():
    a = harness.validate({"experiment": "sampler_moments", "seed": 1, "params": {"samples": 5, "n_max": 8}})
    b = harness.validate({"params": {"n_max": 8, "samples": 5}, "seed": 1, "experiment": "sampler_moments"})
    c = harness.validate({"experiment": "sampler_moments", "seed": 2, "params": {"samples": 5, "n_max": 8}})
    assert a.sha256() == b.sha256() != c.sha256()


def test_run_exit_codes_and_byte_identical_artifacts(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert cli.main(["run", str(cfg), "--out", str(out1)]) == 0
    assert cli.main(["run", str(cfg), "--out", str(out2)]) == 0
    f1 = sorted(out1.iterdir())
    assert [p.suffix for p in f1] == [".csv", ".json"]
    for p in f1:
        assert p.read_bytes() == (out2 / p.name).read_bytes()
    doc = json.loads((out1 / f1[1].name).read_text())
    assert doc["verdict"] == "pass" and doc["config"]["seed"] == 4
    header = f1[0].read_text().splitlines()[0].split(",")
    assert header == list(harness.REGISTRY["sampler_moments"].columns)

    bad = _write(tmp_path, SMALL.replace("fourth_tol = 0.2", "fourth_tol = 1e-12"), "bad.toml")
    assert cli.main(["run", str(bad), "--out", str(out1)]) == 1
    broken = _write(tmp_path, SMALL.replace("n_max = 16", "n_max = 'x'"), "broken.toml")
    assert cli.main(["run", str(broken)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.toml")]) == 2
    garbage = _write(tmp_path, "experiment = [", "garbage.toml")
    assert cli.main(["run", str(garbage)]) == 2
    capsys.readouterr()


def test_seed_override_changes_artifact(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert cli.main(["run", str(cfg), "--seed", "9", "--out", str(tmp_path / "o")]) == 0
    doc = json.loads(next((tmp_path / "o").glob("*.json")).read_text())
    assert doc["config"]["seed"] == 9


def test_env_var_sets_output(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(_write(tmp_path, SMALL))]) == 0
    assert len(list((tmp_path / "env").glob("*.json"))) == 1


def test_list(capsys):
    assert cli.main(["run", "--list"]) == 0
    text = capsys.readouterr().out
    for eid in harness.REGISTRY:
        assert eid in text


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "dnls_gibbs", "run", "--list"],
                       capture_output=True, text=True, cwd=ROOT)
    assert r.returncode == 0 and "flow_invariance" in r.stdout


@pytest.mark.parametrize("eid", ["functionals_dual_path", "chaos_decay", "divergence_by_scaling",
                                 "disk_demo", "sampler_smoke", "shell_limits"])
def test_fast_experiments_pass(eid, tmp_path):
    cfg = harness.config_for(eid, seed=1, fast=True)
    outcome, meta = harness.execute(cfg, write=False)
    assert outcome.passed, outcome.note
    assert meta["doc"]["verdict"] == "pass"
