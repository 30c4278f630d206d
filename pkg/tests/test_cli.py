import csv
import io
import json
import subprocess
import sys

import pytest

from setshaping.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_shape_and_unshape(capsys):
    assert run(capsys, "shape", "0,0", "--m", "2", "--N", "2", "--K", "1") == (0, "0,0,0\n", "")
    assert run(capsys, "shape", "1 0", "--m", "2", "--N", "2", "--K", "1")[1] == "0,1,0\n"
    assert run(capsys, "unshape", "0,1,0", "--m", "2", "--N", "2", "--K", "1")[1] == "1,0\n"
    assert run(capsys, "shape", "ab", "--m", "2", "--N", "2", "--K", "1",
               "--alphabet", "ab")[1] == "aab\n"


def test_unshape_outside_image_exits_2(capsys):
    code, out, err = run(capsys, "unshape", "1,0,0", "--m", "2", "--N", "2", "--K", "1")
    assert code == 2
    assert out == ""
    assert "first infeasible position 2" in err


def test_zero_order_is_identity(capsys):
    assert run(capsys, "shape", "2,0,1", "--m", "3", "--N", "3", "--K", "0")[1] == "2,0,1\n"


def test_shape_json_and_model_mode(capsys):
    code, out, _ = run(capsys, "shape", "0,1", "--m", "3", "--N", "2", "--K", "1",
                       "--mode", "model", "--probs", "0.5,0.3,0.2", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["input"] == [0, 1] and len(doc["output"]) == 3


def test_shape_reads_input_file(tmp_path, capsys):
    src = tmp_path / "x.txt"
    src.write_text("1,0\n")
    assert run(capsys, "shape", "--input", str(src), "--m", "2", "--N", "2", "--K", "1")[1] == "0,1,0\n"


@pytest.mark.parametrize("argv", [
    ["shape", "0,5", "--m", "2", "--N", "2", "--K", "1"],
    ["shape", "0", "--m", "2", "--N", "2", "--K", "1"],
    ["shape", "0,x", "--m", "2", "--N", "2", "--K", "1"],
    ["shape", "0,0", "--m", "2", "--N", "2", "--K", "-1"],
    ["shape", "0,0", "--m", "2", "--N", "2", "--K", "1", "--mode", "model"],
    ["detect", "--channel", "erasure", "--trials", "5"],
    ["figure1", "--mode", "model"],
    ["no-such-command"],
])
def test_errors_exit_1(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_table1_schema(capsys):
    code, out, _ = run(capsys, "table1", "--samples", "300", "--seed", "5")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["alphabet", "K", "I_x", "I_y", "diff", "stderr_x", "stderr_y",
                             "samples", "seed"]
    assert [(r["alphabet"], r["K"]) for r in rows] == [
        (str(m), str(k)) for m in (2, 3, 4, 5) for k in (1, 2)]
    assert all(r["samples"] == "300" and r["seed"] == "5" for r in rows)
    assert len(rows[0]["I_x"].split(".")[1]) == 3


def test_table2_json(capsys):
    code, out, _ = run(capsys, "table2", "--samples", "200", "--format", "json", "--precision", "5")
    rows = json.loads(out)
    assert [r["K"] for r in rows] == [1, 2, 3, 4, 5]
    assert all(r["alphabet"] == 3 for r in rows)
    assert len(rows[0]["diff"].split(".")[1]) == 5


def test_outputs_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "table2", "--samples", "500", "--out", str(a))[0] == 0
    assert run(capsys, "table2", "--samples", "500", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] is not None
    assert manifest["parameters"]["samples"] == 500
    assert "wall_time_s" in manifest and "tool_version" in manifest


def test_figure1_rows(capsys):
    code, out, _ = run(capsys, "figure1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "index,I_x,I_y_K1,I_y_K2,I_y_K3"
    assert len(lines) == 1 + 59049
    assert lines[1] == "0,0.000,0.000,0.000,0.000"
    code, out, _ = run(capsys, "figure1", "--probs", "0.5,0.3,0.2", "--mode", "model",
                       "--N", "4", "--Ks", "1,2")
    assert code == 0 and len(out.splitlines()) == 1 + 81


def test_detect_report(capsys):
    code, out, _ = run(capsys, "detect", "--m", "2", "--N", "50", "--K", "1", "--trials", "50")
    doc = json.loads(out)
    assert code == 0
    assert doc["predicted"] == round(1 / 51, 4)
    assert doc["trials"] == 50 and doc["channel"] == "single"
    code, out, _ = run(capsys, "detect", "--K", "0", "--N", "20", "--trials", "30",
                       "--channel", "symmetric:0.2")
    assert json.loads(out)["detected"] == 0


def test_codec_commands(capsys):
    code, out, _ = run(capsys, "codec", "roundtrip", "--count", "50")
    doc = json.loads(out)
    assert code == 0 and doc["failures"] == 0
    code, out, _ = run(capsys, "codec", "compare", "--m", "3", "--K", "0", "--count", "20")
    assert json.loads(out)["diff"] == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "setshaping.cli", "unshape", "1,0,0",
                           "--m", "2", "--N", "2", "--K", "1"], capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "setshaping.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
