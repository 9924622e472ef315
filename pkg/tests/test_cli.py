import csv
import io
import json

import mpmath
import pytest
from mpmath import mp

from oracles import green_brute
from torusleaf.cli import run


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def invoke_json(*argv):
    code, out, err = invoke(*argv)
    assert code == 0, err
    return json.loads(out)


def test_classify_repelling():
    doc = invoke_json("classify", "--f", "2x+x^2")
    assert doc["command"] == "classify"
    assert doc["result"]["branch"] == "Thm1-i-repelling"


def test_normal_form_example_series():
    doc = invoke_json("normal-form", "--f", "x-x^2+x^3-x^4", "--N", "4")
    obs = doc["result"]["obstruction"]
    assert obs["order"] == 1 and float(obs["value"][0]) == -1 and float(obs["value"][1]) == 0


def test_green_grid_csv_and_probe():
    code, out, _ = invoke("green-grid", "--f", "x^2-1", "--window", "-2,2,-1.5,1.5", "--res", "16", "--probe", "3")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    grid = [r for r in rows if r["kind"] == "grid"]
    assert len(grid) == 256
    probe = [r for r in rows if r["kind"] == "probe"][0]
    with mp.workprec(256):
        ref = green_brute([-1, 0, 1], 3)
        assert abs(mpmath.mpf(probe["g"]) - ref) <= mpmath.mpf(probe["certified_error"]) + mpmath.mpf("1e-60")
    inside = [r for r in grid if abs(complex(float(r["re"]), float(r["im"]))) < 0.3]
    assert all(float(r["g"]) == 0 for r in inside)


def test_negative_values_are_not_options():
    doc = invoke_json("classify", "--f", "-x+x^2")
    assert doc["result"]["branch"] == "Thm1-ii-parabolic"


def test_cycles_json():
    doc = invoke_json("cycles", "--f", "x^2", "--m-max", "2")
    res = doc["result"]
    assert res["root_counts"] == {"1": 2, "2": 4} and res["complete"]
    assert sorted(c["period"] for c in res["cycles"]) == [1, 1, 2]


def test_backward_orbit():
    doc = invoke_json("backward-orbit", "--f", "x^2", "--cycle", "1", "--from", "1.2", "--steps", "20")
    assert float(doc["result"]["max_step_residual"]) < 1e-12


def test_surface_check_green():
    doc = invoke_json("surface-check", "--f", "x^2", "--mode", "green", "--samples", "50")
    assert float(doc["result"]["gluing_max_residual"]) < 1e-12


def test_diophantine_golden():
    doc = invoke_json("diophantine", "--tau", "golden", "--n-max", "1000")
    assert doc["result"]["condition_i"]["holds"] is True


def test_sweep_csv():
    code, out, _ = invoke("sweep", "--grid", "1/3", "--grid", "0.9+0.1i", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["branch"] for r in rows] == ["Thm1-ii-parabolic", "Thm1-i-attracting"]


def test_reports_are_self_describing():
    doc = invoke_json("classify", "--f", "0.9x+x^2", "--precision", "160", "--seed", "7")
    cfg = doc["config"]
    assert cfg["precision_bits"] == 160 and cfg["seed"] == 7
    assert "tol_effective" in cfg and "version" in doc
    assert doc["result"]["precision_bits"] == 160


def test_out_file(tmp_path):
    target = tmp_path / "v.json"
    code, out, err = invoke("classify", "--f", "0.9x+x^2", "--out", str(target))
    assert code == 0 and out == "" and "wrote" in err
    assert json.loads(target.read_text(encoding="utf-8"))["result"]["branch"] == "Thm1-i-attracting"


@pytest.mark.parametrize(
    "argv",
    [
        ("bogus",),
        ("classify", "--f", "x+"),
        ("classify", "--f", "(1+x"),
        ("classify",),
        ("classify", "--f", "2x", "--precision", "20"),
        ("classify", "--f", "2x", "--lambda", "1.5"),
        ("classify", "--f", "2x", "--eps0", "0.6"),
        ("classify", "--f", "2x", "--tol", "-1"),
    ],
)
def test_usage_errors_exit_1(argv):
    code, out, err = invoke(*argv)
    assert code == 1 and out == "" and "usage" in err


def test_precondition_exit_2():
    code, _, err = invoke("surface-check", "--f", "x+x^2")
    assert code == 2 and "precondition" in err


def test_precision_exhausted_exit_3():
    code, _, err = invoke("diophantine", "--tau", "0.4000000001@40")
    assert code == 3 and "precision" in err


def test_nf_max_flag():
    doc = invoke_json("classify", "--tau", "1/7", "--nf-max", "4")
    assert doc["result"]["branch"] == "inconclusive"
    assert doc["result"]["limiting_stage"] == "normal-form"
