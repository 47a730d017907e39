import csv
import subprocess
import sys
from pathlib import Path

import pytest

from bouq.cli import main

UPPER_INI = """
[experiment]
mode = upper-cl
[kernel]
family = matern
nu = 2.5
a0_d_omega = 5
[domain]
lower = 0
upper = 1
"""

OPT_INI = """
[experiment]
seed = 3
n_initial = 4
[kernel]
nu = 2.5
a0_d_omega = 10
[search]
grid_per_dim = 21
polish_budget = 20
[abo]
iterations = 10
"""

COV_INI = """
[experiment]
n_repetitions = 2
n_initial = 4
checkpoints = 1, 3
[kernel]
nu = 1.5
a0_d_omega = 10
[search]
grid_per_dim = 13
lhs_candidates = 10
"""

MANIFEST = """table,family,nu,p,n_design,a0_d_omega,design_kind,n_reps,grid_size,maximin_candidates
t,matern,1.5,1,8,3.0,maximin_lhs,20,30,10
t,gaussian,,1,6,1.0,uniform,20,30,10
"""


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(l for l in fh if not l.startswith("#")))


@pytest.fixture
def files(tmp_path):
    (tmp_path / "u.ini").write_text(UPPER_INI)
    (tmp_path / "o.ini").write_text(OPT_INI)
    (tmp_path / "c.ini").write_text(COV_INI)
    (tmp_path / "m.csv").write_text(MANIFEST)
    (tmp_path / "data.csv").write_text("x1,y\n0.1,0.3\n0.5,-0.2\n0.9,0.8\n")
    (tmp_path / "query.csv").write_text("x1\n0.5\n0.3\n")
    return tmp_path


def test_upper_cl_command(files):
    out = files / "out.csv"
    assert main(["upper-cl", "--config", str(files / "u.ini"), "--data", str(files / "data.csv"),
                 "--query", str(files / "query.csv"), "--out", str(out)]) == 0
    r = rows(out)
    assert list(r[0]) == ["x1", "mu", "s", "upper_cl"]
    assert float(r[0]["upper_cl"]) == pytest.approx(-0.2, abs=1e-9)
    assert float(r[1]["upper_cl"]) > float(r[1]["mu"])


def test_upper_cl_single_point_matches_library(files):
    import numpy as np
    from bouq import uq
    from bouq.config import load_config
    from bouq.gp import Dataset, fit
    (files / "one.csv").write_text("0.4,1.5\n")
    out = files / "out.csv"
    assert main(["upper-cl", "--config", str(files / "u.ini"), "--data", str(files / "one.csv"),
                 "--query", str(files / "query.csv"), "--out", str(out)]) == 0
    cfg = load_config(files / "u.ini")
    k = cfg.kernel()
    post = fit(k, Dataset(np.array([[0.4]]), np.array([1.5])))
    c = uq.UqConstants.from_kernel(k, cfg.domain)
    assert float(rows(out)[1]["upper_cl"]) == uq.upper_cl(np.array([0.3]), c, post)


def test_upper_cl_empty_query_and_errors(files):
    (files / "empty.csv").write_text("x1\n")
    out = files / "out.csv"
    args = ["upper-cl", "--config", str(files / "u.ini"), "--data", str(files / "data.csv"),
            "--out", str(out)]
    assert main(args + ["--query", str(files / "empty.csv")]) == 0
    assert rows(out) == []
    (files / "bad.csv").write_text("x1,y\n0.1,2\n0.2,zz\n")
    bad = ["upper-cl", "--config", str(files / "u.ini"), "--data", str(files / "bad.csv"),
           "--query", str(files / "query.csv"), "--out", str(out)]
    assert main(bad) == 1
    (files / "wide.csv").write_text("0.1,0.2\n")
    assert main(args + ["--query", str(files / "wide.csv")]) == 1


def test_optimize_command(files):
    prefix = files / "run"
    assert main(["optimize", "--config", str(files / "o.ini"), "--objective", "gp-sample",
                 "--out-prefix", str(prefix), "--knn-json"]) == 0
    trace = rows(f"{prefix}_trace.csv")
    assert max(int(r["iteration"]) for r in trace) == 10
    best = max(float(r["response"]) for r in trace)
    interval = {r["method"]: r for r in rows(f"{prefix}_interval.csv")}
    assert float(interval["ci_seq"]["lo"]) == best
    assert float(interval["ci_seq"]["hi"]) >= best
    arg = (interval["ci_seq"]["x1"], interval["ci_seq"]["x2"])
    region = rows(f"{prefix}_region.csv")
    assert any((r["x1"], r["x2"]) == arg and r["in_region"] == "true" for r in region)
    assert Path(f"{prefix}_region_knn.json").exists()


def test_optimize_unknown_objective(files, capsys):
    assert main(["optimize", "--config", str(files / "o.ini"), "--objective", "rosen",
                 "--out-prefix", str(files / "x")]) == 1
    assert "branin" in capsys.readouterr().err


def test_config_error_exit(files):
    (files / "bad.ini").write_text("[kernel]\nnu = 7\n")
    assert main(["coverage", "--config", str(files / "bad.ini"), "--out", str(files / "o.csv")]) == 1


def test_partial_results_exit(files):
    (files / "m2.csv").write_text(MANIFEST + "t,matern,0.5,1,6,1.0,maximin_lhs,5,10,5\n")
    out = files / "cal.csv"
    assert main(["calibrate", "--manifest", str(files / "m2.csv"), "--out", str(out)]) == 3
    assert len(rows(out)) == 3


def test_seed_flag_positions(files):
    a, b = files / "a.csv", files / "b.csv"
    main(["--seed", "9", "coverage", "--config", str(files / "c.ini"), "--out", str(a)])
    main(["coverage", "--config", str(files / "c.ini"), "--out", str(b), "--seed", "9"])
    assert a.read_bytes() == b.read_bytes()
    assert "# seed = 9" in a.read_text()


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "bouq.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "calibrate" in proc.stdout
