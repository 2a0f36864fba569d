import csv
import hashlib
import io
import subprocess
import sys

import numpy as np
import pytest

from coopduality import data_path
from coopduality.cli import EXIT_CHECK, EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, REGION_COLUMNS, main
from coopduality.probability import binary_entropy
from coopduality.regions import dbc_bounds
from coopduality.specfile import channel_from_doc, read_spec


def d(name):
    return str(data_path(name))


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_region_dbc_matches_bounds(capsys):
    code, out, _ = run(["region", d("blackwell.ch"), "--region", "dbc", "--r12-grid", "0,0.5"], capsys)
    assert code == EXIT_OK
    recs = rows(out)
    assert tuple(recs[0]) == REGION_COLUMNS and len(recs) == 2
    ch = channel_from_doc(read_spec(data_path("blackwell.ch")))
    for rec in recs:
        want = dbc_bounds(ch, ch.p_x, float(rec["r12"])).as_tuple()
        got = (float(rec["r1"]), float(rec["r2"]), float(rec["r_sum"]))
        assert got == pytest.approx(want, abs=1e-12)
    assert float(recs[0]["r1"]) == pytest.approx(binary_entropy(1 / 3))


def test_region_cards_one_one_is_one_auxiliary(capsys):
    code, out, _ = run(["region", d("dsbs_p010.src"), "--region", "wak", "--cards", "1,1"], capsys)
    assert code == EXIT_OK
    recs = rows(out)
    assert {r["aux_id"] for r in recs} == {"0"}
    lower = [r for r in recs if r["record"] == "lower"]
    assert len(lower) == 1 and float(lower[0]["r12"]) == 0.0 and float(lower[0]["r1"]) == pytest.approx(1.0)


def test_region_other_kinds_run(capsys):
    for argv in (["region", d("dsbs_p010.src"), "--region", "sw", "--r12-grid", "0,0.2"],
                 ["region", d("blackwell.ch"), "--region", "bc", "--cards", "2,1"],
                 ["region", d("blackwell.ch"), "--region", "bc-alt", "--cards", "1,2"],
                 ["region", d("blackwell.ch"), "--region", "rbc", "--cards", "1,1", "--r12-grid", "0.5"]):
        code, out, err = run(argv, capsys)
        assert code == EXIT_OK, err
        assert len(rows(out)) >= 1


def test_malformed_table_row_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.src"
    bad.write_text("kind: source\nalphabet X1 2\nalphabet X2 2\nalphabet Y 2\npmf X1 X2\n  0.5 zero\n  0 0.5\n"
                   "map Y -> X1\n  0 1\n")
    code, _, err = run(["region", str(bad), "--region", "wak"], capsys)
    assert code == EXIT_PARSE
    assert "line 6" in err


def test_missing_file_exits_2(capsys):
    assert run(["region", "/nonexistent.src", "--region", "wak"], capsys)[0] == EXIT_PARSE


def test_wrong_kind_exits_2(capsys):
    assert run(["region", d("blackwell.ch"), "--region", "wak"], capsys)[0] == EXIT_PARSE


def test_duality_ok(capsys):
    code, out, _ = run(["duality", d("dsbs_p010_y4.src"), d("bsc_pair.wak")], capsys)
    assert code == EXIT_OK and "status=ok" in out


def test_duality_tolerance_failure_exits_1(capsys):
    code, out, _ = run(["duality", d("dsbs_p010_y4.src"), d("bsc_pair.wak"), "--tol", "-1"], capsys)
    assert code == EXIT_CHECK


ELIM = "R10,R11,R20,R22,R1',R2'"


def test_fme_reproduces_inner_bound(capsys):
    code, out, _ = run(["fme", d("marton_split.sys"), "--eliminate", ELIM, "--check-against", d("marton_inner.sys")],
                       capsys)
    assert code == EXIT_OK
    assert "vars: R12 R1 R2" in out


def test_fme_eliminate_nothing_is_identity(capsys):
    code, _, _ = run(["fme", d("marton_inner.sys"), "--check-against", d("marton_inner.sys"), "--include-constant"],
                     capsys)
    assert code == EXIT_OK


def test_fme_perturbed_reference_exits_1(tmp_path, capsys):
    text = data_path("marton_inner.sys").read_text().replace("R2 <= I(V,U2;Y2) + R12", "R2 <= I(V,U2;Y2) + 2*R12")
    ref = tmp_path / "perturbed.sys"
    ref.write_text(text)
    code, _, _ = run(["fme", d("marton_split.sys"), "--eliminate", ELIM, "--check-against", str(ref)], capsys)
    assert code == EXIT_CHECK


def test_fme_unknown_variable(capsys):
    code, _, _ = run(["fme", d("marton_split.sys"), "--eliminate", "R99"], capsys)
    assert code in (EXIT_PARSE, EXIT_INFEASIBLE)


def test_simulate_zero_rate_run(tmp_path, capsys):
    src = tmp_path / "point.src"
    src.write_text("kind: source\nalphabet X1 2\nalphabet X2 2\nalphabet Y 2\npmf X1 X2\n  1 0\n  0 0\n"
                   "map Y -> X1\n  0 1\n")
    aux = tmp_path / "const.wak"
    aux.write_text("kind: aux-wak\nalphabet X1 2\nalphabet X2 2\nalphabet Y 2\nalphabet V 1\nalphabet U 1\n"
                   "cond V | X1\n  1\n  1\ncond U | X2 V\n  1\n  1\ncond Y | X1 U V\n  1 0\n  0 1\n")
    code, out, err = run(["simulate", str(src), str(aux), "--scheme", "wak1", "--n-sweep", "4,8", "--trials", "20"],
                         capsys)
    assert code == EXIT_OK, err
    assert all(float(r["error_rate_overall"]) == 0.0 for r in rows(out))


def test_simulate_theta_above_one_exits_3(capsys):
    code, _, _ = run(["simulate", d("dsbs_p010_y4.src"), d("bsc_pair.wak"), "--scheme", "wak1", "--theta", "1.5"],
                     capsys)
    assert code == EXIT_INFEASIBLE


def test_simulate_codebook_cap_exits_3(capsys):
    code, _, err = run(["simulate", d("dsbs_p010_y4.src"), d("bsc_pair.wak"), "--scheme", "wak1", "--n-sweep", "16",
                        "--cap", "16", "--trials", "1"], capsys)
    assert code == EXIT_INFEASIBLE and "cap" in err


def test_simulate_csv_is_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"sim{k}.csv"
        stages = tmp_path / f"stages{k}.csv"
        assert main(["simulate", d("blackwell.ch"), "--scheme", "bc", "--n-sweep", "6,8", "--trials", "25",
                     "--seed", "2", "--out", str(out), "--stages-out", str(stages)]) == EXIT_OK
        outs.append((out.read_bytes(), stages.read_bytes()))
    assert outs[0] == outs[1]
    assert b"fail_cover" in outs[0][0] and b"stage" in outs[0][1]


def test_manifest_is_deterministic(tmp_path):
    texts = []
    for _ in range(2):
        out = tmp_path / "r.csv"
        assert main(["region", d("dsbs_p010.src"), "--region", "sw", "--out", str(out)]) == EXIT_OK
        texts.append((out.read_bytes(), (tmp_path / "r.csv.manifest").read_text()))
    assert texts[0] == texts[1]
    manifest = dict(line.split("=", 1) for line in texts[0][1].splitlines())
    assert manifest["command"] == "region"
    assert len(manifest["input.0.sha256"]) == 64
    assert manifest["output.main.sha256"] == hashlib.sha256(texts[0][0]).hexdigest()
    assert manifest["backend"] in ("numba", "numpy") and "version.coopduality" in manifest


def test_markov_queries(capsys):
    code, out, _ = run(["markov", d("block.fdg")], capsys)
    assert code == EXIT_OK and "true" in out.lower()
    code, out, _ = run(["markov", d("collider.fdg"), "--method", "dsep"], capsys)
    assert code == EXIT_OK and "dsep=false" in out
    code, _, _ = run(["markov", d("collider.fdg"), "--query", "A | A"], capsys)
    assert code == EXIT_PARSE


def test_markov_crosscheck_and_dot(tmp_path, capsys):
    dot = tmp_path / "g.dot"
    code, out, _ = run(["markov", d("block.fdg"), "--crosscheck", "5", "--dot", str(dot)], capsys)
    assert code == EXIT_OK
    assert dot.read_text().startswith("digraph")


def test_console_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "coopduality.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "coopduality" in res.stdout
