"""CLI exit codes, determinism, and the report bundle."""

import json
import subprocess
import sys

from conftest import REPO, SCENARIOS


def run_cli(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "entailsync.cli", *args],
        capture_output=True,
        text=True,
        cwd=str(REPO),
        env=env,
    )


def test_run_fig4_exit_zero_and_tombstone_reported():
    res = run_cli("run", str(SCENARIOS / "fig4.json"))
    assert res.returncode == 0, res.stderr
    report = json.loads(res.stdout)
    assert report["converged"]
    assert report["resolves"] == 1


def test_run_fig6_stop_at_conflict_exit_one():
    res = run_cli("run", str(SCENARIOS / "fig6.json"), "--stop-at-conflict")
    assert res.returncode == 1
    report = json.loads(res.stdout)
    assert len(report["residual_conflicts"]) == 1
    conflict = report["residual_conflicts"][0]
    assert conflict["conflicting_premises"] == ["@init:2"]


def test_run_empty_scenario_exit_zero():
    res = run_cli("run", str(SCENARIOS / "empty.json"))
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert report["converged"] and report["rounds"] == 0


def test_run_malformed_scenario_exit_two(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{nope")
    res = run_cli("run", str(bad))
    assert res.returncode == 2
    missing = run_cli("run", str(tmp_path / "ghost.json"))
    assert missing.returncode == 2


def test_run_byte_deterministic():
    a = run_cli("run", str(SCENARIOS / "theorem2_fanout.json"))
    b = run_cli("run", str(SCENARIOS / "theorem2_fanout.json"))
    assert a.stdout == b.stdout
    assert a.returncode == b.returncode == 0


def test_seed_env_override(tmp_path):
    import os

    env = dict(os.environ, ENTAILSYNC_SEED="42")
    res = run_cli("run", str(SCENARIOS / "fig2.json"), env=env)
    assert res.returncode == 0


def test_out_dir_bundle(tmp_path):
    out = tmp_path / "bundle"
    res = run_cli("run", str(SCENARIOS / "fig4.json"), "--out-dir", str(out))
    assert res.returncode == 0
    assert (out / "report.json").exists()
    csv_text = (out / "states.csv").read_text()
    assert csv_text.splitlines()[0] == "replica,register,kind,value"
    assert "r1,0,arith,8" in csv_text.replace('"', "")
    for name in ("r1", "r2", "r3"):
        png = out / f"graph_{name}.png"
        assert png.exists() and png.read_bytes()[:4] == b"\x89PNG"


def test_export_dot_steps(tmp_path):
    out = tmp_path / "dots"
    res = run_cli(
        "export-dot", str(SCENARIOS / "fig2.json"), "--out", str(out), "--steps", "all", "--json"
    )
    assert res.returncode == 0, res.stderr
    files = sorted(p.name for p in out.iterdir())
    assert "final_r1.dot" in files and "final_r1.json" in files
    # pre- and post-resolve steps both dumped
    step_files = [f for f in files if f.startswith("step")]
    assert len(step_files) >= 10
    final = (out / "final_r1.dot").read_text()
    assert "digraph entailment" in final and "style=dashed" in final


def test_check_register_pass_and_fail():
    ok = run_cli("check-register", "plain")
    assert ok.returncode == 0 and "discard-complete" in ok.stdout
    ok = run_cli("check-register", "arith", "--max-ops", "5")
    assert ok.returncode == 0
    bad = run_cli("check-register", "broken-demo")
    assert bad.returncode == 1
    assert "counterexample" in bad.stdout
    unknown = run_cli("check-register", "no-such-kind")
    assert unknown.returncode == 2
