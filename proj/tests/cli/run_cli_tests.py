#!/usr/bin/env python3
"""End-to-end checks for the medex command line tool.

Usage: run_cli_tests.py <medex-binary> <configs-dir>

Every check shells out to the real binary and inspects the files it leaves
behind; nothing here links against the library.
"""
import json
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

MEDEX = None
CONFIGS = None
failures = []


def run(args, env=None, expect=0):
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    proc = subprocess.run([MEDEX] + args, capture_output=True, text=True, env=full_env)
    if proc.returncode != expect:
        raise AssertionError(
            f"medex {' '.join(args)}: exit {proc.returncode}, expected {expect}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}"
        )
    return proc


def check(name, fn):
    try:
        fn()
        print(f"[ok] {name}")
    except Exception as exc:  # noqa: BLE001 - report and keep going
        failures.append(name)
        print(f"[FAIL] {name}: {exc}")


def read(path):
    return pathlib.Path(path).read_bytes()


def assert_same_files(dir_a, dir_b, names):
    for name in names:
        a, b = read(pathlib.Path(dir_a, name)), read(pathlib.Path(dir_b, name))
        assert a == b, f"{name} differs between {dir_a} and {dir_b}"


def no_temp_litter(root):
    stray = [p for p in pathlib.Path(root).rglob("*.tmp*")]
    assert not stray, f"temporary files left behind: {stray}"


def design_checks(tmp):
    out = tmp / "design_lhd"
    run(["design", "--type", "lhd", "--n", "4", "--p", "2", "--seed", "1", "--out", str(out)])
    rows = read(out / "design.csv").decode().strip().splitlines()
    assert rows[0] == "x1,x2", rows[0]
    assert len(rows) == 5, rows
    # Latin hypercube: each column holds every cell midpoint exactly once.
    for col in range(2):
        values = sorted(float(r.split(",")[col]) for r in rows[1:])
        expected = [(2 * i + 1) / 8 for i in range(4)]
        assert values == expected, (values, expected)

    out2 = tmp / "design_lhd_again"
    run(["design", "--type", "lhd", "--n", "4", "--p", "2", "--seed", "1", "--out", str(out2)])
    assert read(out / "design.csv") == read(out2 / "design.csv"), "design rerun differs"

    manifest = json.loads(read(out / "design_manifest.json"))
    assert manifest["tool_version"], manifest
    assert manifest["outputs"] == ["design.csv"], manifest

    run(["design", "--p", "2"], expect=2)  # missing --n
    run(["design", "--type", "sobol", "--n", "4", "--p", "2"], expect=2)


def explore_checks(tmp):
    cfg = CONFIGS / "toy2d_explore.json"
    out1, out2 = tmp / "explore1", tmp / "explore2"
    run(["explore", str(cfg), "--out", str(out1)])
    run(["explore", str(cfg), "--out", str(out2), "--threads", "3"])

    report = json.loads(read(out1 / "report.json"))
    assert report["min_loss"] < 1e-4, report["min_loss"]
    assert report["evaluations"] == 100, report
    data_files = ["report.json", "evaluations.csv", "metrics.csv", "energy.csv",
                  "checkpoint.json"]
    assert_same_files(out1, out2, data_files)

    # Hash invariance under key reordering.
    original = json.loads(cfg.read_text())
    reordered = {k: original[k] for k in reversed(list(original))}
    recfg = tmp / "reordered.json"
    recfg.write_text(json.dumps(reordered))
    out3 = tmp / "explore3"
    run(["explore", str(recfg), "--out", str(out3)])
    h1 = json.loads(read(out1 / "explore_manifest.json"))["config_hash"]
    h3 = json.loads(read(out3 / "explore_manifest.json"))["config_hash"]
    assert h1 == h3, (h1, h3)
    assert_same_files(out1, out3, data_files)


def resume_checks(tmp):
    # Uninterrupted two-cycle run.
    base = json.loads((CONFIGS / "toy2d_explore.json").read_text())
    base["cycles"] = 2
    cfg2 = tmp / "toy_two_cycles.json"
    cfg2.write_text(json.dumps(base))
    full = tmp / "full"
    run(["explore", str(cfg2), "--out", str(full)])

    # One-cycle run stands in for a run interrupted after its first cycle.
    one = dict(base)
    one["cycles"] = 1
    cfg1 = tmp / "toy_one_cycle.json"
    cfg1.write_text(json.dumps(one))
    partial = tmp / "partial"
    run(["explore", str(cfg1), "--out", str(partial)])
    checkpoint = json.loads(read(partial / "checkpoint.json"))
    assert checkpoint["state"]["completed_cycles"] == 1
    checkpoint["state"]["config"]["cycles"] = 2
    mid = tmp / "mid"
    mid.mkdir()
    (mid / "checkpoint.json").write_text(json.dumps(checkpoint))
    shutil.copy(partial / "evaluations.csv", mid / "evaluations.csv")

    resumed = tmp / "resumed"
    run(["explore", "--resume", str(mid / "checkpoint.json"), "--out", str(resumed)])
    assert_same_files(full, resumed,
                      ["report.json", "evaluations.csv", "metrics.csv", "energy.csv",
                       "checkpoint.json"])


def config_error_checks(tmp):
    bad = tmp / "bad_problem.json"
    bad.write_text(json.dumps({"schema_version": 1, "problem": {"name": "sphere"}}))
    proc = run(["explore", str(bad)], expect=2)
    assert "sphere" in proc.stderr, proc.stderr

    unknown = tmp / "unknown_key.json"
    doc = json.loads((CONFIGS / "toy2d_explore.json").read_text())
    doc["med"]["iterationz"] = 3
    unknown.write_text(json.dumps(doc))
    proc = run(["explore", str(unknown)], expect=2)
    assert "iterationz" in proc.stderr, proc.stderr

    run(["explore", str(tmp / "missing.json")], expect=2)
    run(["explore"], expect=2)  # neither config nor --resume

    notjson = tmp / "notjson.json"
    notjson.write_text("{ nope")
    run(["explore", str(notjson)], expect=2)


def compare_checks(tmp):
    cfg = tmp / "cmp.json"
    cfg.write_text(json.dumps({
        "schema_version": 1,
        "problem": {"name": "toy2d"},
        "initial_size": 12,
        "design_sweeps": 5,
        "reps": 4,
        "seed_base": 100,
    }))
    out1, out2 = tmp / "cmp1", tmp / "cmp2"
    run(["compare", str(cfg), "--out", str(out1), "--threads", "1"])
    run(["compare", str(cfg), "--out", str(out2), "--threads", "4"])
    assert_same_files(out1, out2, ["comparison.csv", "summary.json"])

    header = read(out1 / "comparison.csv").decode().splitlines()[0]
    for column in ["delta_min", "delta_median", "sd_ratio", "win_min", "win_median"]:
        assert column in header.split(","), header
    assert len(read(out1 / "comparison.csv").decode().strip().splitlines()) == 5

    summary = json.loads(read(out1 / "summary.json"))
    for key in ["min_win_rate", "median_win_rate", "sd_ratio_above_one_rate"]:
        assert 0.0 <= summary[key] <= 1.0, summary

    zero = tmp / "cmp_zero.json"
    zero.write_text(json.dumps({"schema_version": 1, "problem": {"name": "toy2d"}, "reps": 0}))
    run(["compare", str(zero)], expect=2)


def bench_checks(tmp):
    out = tmp / "bench"
    run(["bench", "--p", "4", "--n", "6,8", "--seed", "2", "--out", str(out)])
    rows = read(out / "timing.csv").decode().strip().splitlines()
    assert rows[0] == "p,n,seconds", rows
    assert len(rows) == 3, rows
    manifest = json.loads(read(out / "bench_manifest.json"))
    assert manifest["tool_version"], manifest

    run(["bench", "--p", "4,abc", "--n", "8"], expect=2)
    run(["bench", "--p", "3", "--n", "8"], expect=2)


def env_out_dir_checks(tmp):
    out = tmp / "from_env"
    run(["design", "--type", "uniform", "--n", "3", "--p", "2", "--seed", "9"],
        env={"MEDEX_OUT_DIR": str(out)})
    assert (out / "design.csv").exists()


def main():
    global MEDEX, CONFIGS
    MEDEX = sys.argv[1]
    CONFIGS = pathlib.Path(sys.argv[2])
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="medex_cli_"))
    try:
        check("design outputs and errors", lambda: design_checks(tmp))
        check("explore report, determinism, hash stability", lambda: explore_checks(tmp))
        check("resume equals uninterrupted run", lambda: resume_checks(tmp))
        check("config diagnostics", lambda: config_error_checks(tmp))
        check("compare outputs and thread independence", lambda: compare_checks(tmp))
        check("bench grid and list validation", lambda: bench_checks(tmp))
        check("output dir from environment", lambda: env_out_dir_checks(tmp))
        check("no temp litter", lambda: no_temp_litter(tmp))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    if failures:
        print(f"{len(failures)} CLI check(s) failed: {failures}")
        return 1
    print("all CLI checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
