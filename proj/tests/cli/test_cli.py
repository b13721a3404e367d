import json
import os
import subprocess
from pathlib import Path

MINIMAL = {
    "env": {"type": "static", "rewards": [[1.0, 0.5, 0.0]], "gamma": 0.9},
    "algorithms": ["pepg"],
    "train": {"eta": 0.1, "trajectories": 20, "iterations": 10},
}


def run(bin_, *args, env=None):
    return subprocess.run([bin_, *args], capture_output=True, text=True, env=env)


def write_spec(tmp_path, doc):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_train_writes_csv_and_manifest(pepg_bin, tmp_path):
    spec = write_spec(tmp_path, MINIMAL)
    r = run(pepg_bin, "train", "--spec", spec, "--seed", "3", "--out", str(tmp_path / "o"))
    assert r.returncode == 0, r.stderr
    csv = tmp_path / "o" / "pepg_seed3.csv"
    lines = csv.read_text().strip().splitlines()
    assert len(lines) == 11  # header plus one row per iteration
    manifest = json.loads((tmp_path / "o" / "pepg_seed3.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["algo"] == "pepg"
    assert not manifest["aborted"]


def test_negative_eta_names_the_key(pepg_bin, tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["train"]["eta"] = -1.0
    r = run(pepg_bin, "train", "--spec", write_spec(tmp_path, doc), "--out", str(tmp_path))
    assert r.returncode == 2
    assert "train.eta" in r.stderr


def test_override_is_validated(pepg_bin, tmp_path):
    spec = write_spec(tmp_path, MINIMAL)
    r = run(pepg_bin, "train", "--spec", spec, "--override", "train.eta=-2", "--out", str(tmp_path))
    assert r.returncode == 2
    assert "train.eta" in r.stderr


def test_unknown_key_rejected(pepg_bin, tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["train"]["etta"] = 0.1
    r = run(pepg_bin, "train", "--spec", write_spec(tmp_path, doc), "--out", str(tmp_path))
    assert r.returncode == 2
    assert "train.etta" in r.stderr


def test_missing_spec_file(pepg_bin, tmp_path):
    r = run(pepg_bin, "train", "--spec", str(tmp_path / "nope.json"))
    assert r.returncode == 2


def test_verify_identities(pepg_bin, tmp_path):
    r = run(pepg_bin, "verify", "--suite", "identities", "--instances", "3", "--out", str(tmp_path))
    assert r.returncode == 0, r.stdout + r.stderr
    report = json.loads((tmp_path / "verify_identities.json").read_text())
    assert report


def test_verify_catches_corrupted_advantage(pepg_bin, tmp_path):
    r = run(pepg_bin, "verify", "--suite", "identities", "--instances", "2", "--corrupt-advantage")
    assert r.returncode == 1


def test_verify_json_is_reproducible(pepg_bin, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        r = run(pepg_bin, "verify", "--suite", "identities", "--instances", "2", "--seed", "4", "--out", str(d))
        assert r.returncode == 0
    assert (a / "verify_identities.json").read_bytes() == (b / "verify_identities.json").read_bytes()


def test_plot_without_inputs(pepg_bin, tmp_path):
    r = run(pepg_bin, "plot", str(tmp_path / "*.csv"), "--out", str(tmp_path / "p.svg"))
    assert r.returncode == 2
    assert "no inputs" in r.stderr


def test_plot_reads_train_output(pepg_bin, tmp_path):
    spec = write_spec(tmp_path, MINIMAL)
    out = tmp_path / "o"
    assert run(pepg_bin, "train", "--spec", spec, "--seed", "0-1", "--out", str(out)).returncode == 0
    svg = tmp_path / "c.svg"
    r = run(pepg_bin, "plot", str(out), "--kind", "curves", "--out", str(svg))
    assert r.returncode == 0, r.stderr
    assert svg.read_text().lstrip().startswith("<svg")


def test_csv_is_deterministic(pepg_bin, tmp_path, source_dir):
    spec = os.path.join(source_dir, "configs", "expfam.json")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        r = run(pepg_bin, "train", "--spec", spec, "--seed", "7", "--override", "train.iterations=20",
                "--out", str(out))
        assert r.returncode == 0, r.stderr
        outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    assert outs[0] and outs[0] == outs[1]


def test_seed_from_environment(pepg_bin, tmp_path):
    spec = write_spec(tmp_path, MINIMAL)
    env = dict(os.environ, PEPG_SEED="5")
    r = run(pepg_bin, "train", "--spec", spec, "--out", str(tmp_path / "o"), env=env)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "o" / "pepg_seed5.csv").exists()


def test_sweep_summary(pepg_bin, tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["algorithms"] = ["pepg-reg"]
    doc["sweep"] = {"key": "train.lambda", "values": [0.5, 2]}
    r = run(pepg_bin, "sweep", "--spec", write_spec(tmp_path, doc), "--seed", "0", "--out", str(tmp_path / "o"))
    assert r.returncode == 0, r.stderr
    summary = json.loads((tmp_path / "o" / "sweep_summary.json").read_text())
    assert summary


def test_shipped_configs_parse(pepg_bin, source_dir, tmp_path):
    for p in sorted(Path(source_dir, "configs").glob("*.json")):
        r = run(pepg_bin, "train", "--spec", str(p), "--seed", "0", "--override", "train.iterations=1",
                "--override", "train.trajectories=2", "--out", str(tmp_path / p.stem))
        assert r.returncode == 0, f"{p.name}: {r.stderr}"
