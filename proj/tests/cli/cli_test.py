"""End-to-end checks of the curstat command-line tool (exit codes, outputs)."""
import csv
import json
import os
import subprocess
import sys
import tempfile

BIN = sys.argv[1]
CONFIGS = sys.argv[2]
failures = []


def run(*args, expect):
    proc = subprocess.run([BIN, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        failures.append(f"{' '.join(args)}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return proc


def check(cond, what):
    if not cond:
        failures.append(what)


with tempfile.TemporaryDirectory() as tmp:
    data = os.path.join(tmp, "five.csv")
    run("simulate", "--protocol", "five", "--n", "300", "--seed", "4", "--out", data, expect=0)
    run("simulate", "--protocol", os.path.join(CONFIGS, "protocols", "seven_state.json"), "--n", "50",
        "--out", os.path.join(tmp, "seven.csv"), expect=0)

    prefix = os.path.join(tmp, "est")
    run("estimate", "--tree", os.path.join(CONFIGS, "trees", "five_state.json"), "--data", data,
        "--method", "fre", "--from", "1", "--to", "3", "--out", prefix, expect=0)
    with open(prefix + ".json") as fh:
        first = fh.read()
    out = json.loads(first)
    check(list(out)[:5] == ["grid", "psi_t", "psi", "f_t", "metadata"], "estimate JSON key order")
    check(all(0.0 <= v <= 1.0 for v in out["psi_t"] + out["f_t"]), "estimate values outside [0,1]")
    check(out["f_t"][-1] == 1.0, "F(tau) != 1")
    for key in ("bandwidth", "horizon", "grid_points", "diagnostics", "version", "argv"):
        check(key in out["metadata"], f"metadata lacks {key}")
    with open(prefix + ".csv") as fh:
        rows = list(csv.DictReader(fh))
    check(len(rows) == len(out["grid"]), "CSV and JSON grids differ")

    # Re-running the recorded command reproduces the output exactly.
    run(*out["metadata"]["argv"][1:], expect=0)
    with open(prefix + ".json") as fh:
        check(fh.read() == first, "rerun is not bit-identical")

    off = run("estimate", "--data", data, "--method", "ple", "--from", "2", "--to", "3", expect=0)
    off_json = json.loads(off.stdout)
    check(off_json["psi"] == 0.0 and max(off_json["psi_t"]) == 0.0, "off-path estimate is not zero")
    check("advisory" in off.stderr, "off-path advisory missing")

    bad = os.path.join(tmp, "bad.csv")
    with open(bad, "w") as fh:
        fh.write("id,time,status\n1,0.5,0\n")
    proc = run("estimate", "--data", bad, expect=2)
    check("missing column 'state'" in proc.stderr, "missing-column message")
    run("estimate", "--data", os.path.join(tmp, "nope.csv"), expect=2)
    run("estimate", "--data", data, "--from", "3", "--to", "3", expect=2)
    run("estimate", "--data", data, "--method", "kaplan", expect=2)
    run("estimate", "--bogus", expect=2)

    hopeless = os.path.join(tmp, "hopeless.csv")
    with open(hopeless, "w") as fh:
        fh.write("id,time,state\n")
        for i in range(40):
            fh.write(f"{i},{0.1 * (i + 1)},{2 if i % 3 == 0 else 0}\n")
    run("estimate", "--data", hopeless, "--method", "ple", expect=3)

    ci = run("bootstrap-ci", "--data", data, "--B", "60", "--seed", "3", "--threads", "2", expect=0)
    ci_rows = list(csv.DictReader(ci.stdout.splitlines()))
    check(set(ci_rows[0]) == {"t", "psi", "ci_lower", "ci_upper"}, "bootstrap columns")
    check(all(0 <= float(r["ci_lower"]) <= float(r["ci_upper"]) <= 1 for r in ci_rows), "bootstrap bounds")
    again = run("bootstrap-ci", "--data", data, "--B", "60", "--seed", "3", "--threads", "1", expect=0)
    check(again.stdout == ci.stdout, "bootstrap depends on the thread count")
    run("bootstrap-ci", "--data", data, "--B", "10", expect=2)
    run("bootstrap-ci", "--data", data, "--B", "60", "--target", "f", "--quantile", "1-alpha", expect=0)

    # Add a covariate column and run the pseudo-value regression.
    cov = os.path.join(tmp, "cov.csv")
    with open(data) as src, open(cov, "w") as dst:
        rows = list(csv.DictReader(src))
        dst.write("id,time,state,z\n")
        for i, r in enumerate(rows[:120]):
            dst.write(f"{r['id']},{r['time']},{r['state']},{i % 2}\n")
    reg = run("pseudo-reg", "--data", cov, "--covariates", "z", "--points", "5", expect=0)
    lines = [l for l in reg.stdout.splitlines() if not l.startswith("#")]
    check(lines[0] == "term,estimate,robust_se,z,p" and len(lines) == 7, "pseudo-reg table shape")
    run("pseudo-reg", "--data", cov, "--covariates", "w", expect=2)

    hist = os.path.join(tmp, "hist.csv")
    with open(hist, "w") as fh:
        fh.write("id,time,state\na,0,0\na,1,1\na,2,3\nb,0,0\nb,0.5,cens\n")
    masked = run("mask", "--histories", hist, "--horizon", "4", "--seed", "2", expect=0)
    check(masked.stdout.startswith("id,time,state"), "mask output header")
    with open(hist, "a") as fh:
        fh.write("c,0,0\nc,1,4\n")
    proc = run("mask", "--histories", hist, "--horizon", "4", expect=2)
    check("'c'" in proc.stderr, "mask error names the subject")

    study = os.path.join(tmp, "study.json")
    with open(study, "w") as fh:
        json.dump({"protocol": "five", "sizes": [60], "estimands": ["3|1"], "replicates": 3, "seed": 1}, fh)
    res = os.path.join(tmp, "res.csv")
    run("mc-study", "--config", study, "--out", res, "--threads", "2", expect=0)
    with open(res) as fh:
        check(fh.readline().strip() == "protocol,n,method,estimand,metric,value,replicates", "mc-study header")
    check(os.path.exists(res + ".meta.json"), "mc-study metadata")
    for name in ("five_state_bias.json", "seven_state_bias.json", "five_state_coverage.json"):
        run("mc-study", "--config", os.path.join(CONFIGS, name), "--replicates", "1", "--out",
            os.path.join(tmp, name + ".csv"), expect=0)

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("cli checks passed")
