import csv
import io
import json

import pytest

from ptflab.cli import EXIT_INVALID, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_stdout_csv(capsys):
    code, out, _ = run(capsys, "ns", "--n", "5", "--d", "2", "--exact", "--delta", "0.1,0.2")
    assert code == EXIT_OK
    r = rows(out)
    assert [x["delta"] for x in r] == ["0.1", "0.2"]
    assert all(x["samples"] == "exact" and x["wall_ms"] == "" for x in r)
    assert float(r[0]["estimate"]) < float(r[1]["estimate"])


def test_gl_extremal_average_sensitivity(capsys):
    code, out, _ = run(capsys, "as", "--poly", "gl-extremal", "--n", "10", "--d", "2", "--exact")
    assert code == EXIT_OK
    (r,) = rows(out)
    assert r["equal"] == "True"
    assert float(r["formula"]) == float(r["estimate"])


def test_bernoulli_enumeration_is_exact(capsys):
    code, out, _ = run(capsys, "prg-bern", "--enumerate")
    assert code == EXIT_OK
    (r,) = rows(out)
    assert float(r["estimate"]) == 0.0 and r["samples"] == "exact"


def test_fool_rows_carry_poly_hash(capsys):
    code, out, _ = run(capsys, "fool", "--n", "6", "--samples", "1000", "--count", "2")
    assert code == EXIT_OK
    r = rows(out)
    assert [x["instance"] for x in r] == ["0", "1"]
    assert all(len(x["poly_hash"]) == 12 for x in r)
    assert r[0]["poly_hash"] != r[1]["poly_hash"]


def test_output_directory(capsys, tmp_path):
    out = tmp_path / "res"
    code, stdout, _ = run(capsys, "influence", "--n", "4", "--seed", "0x2a", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert sorted(p.name for p in out.iterdir()) == ["influence.csv", "influence.json", "manifest.json"]
    data = json.loads((out / "influence.json").read_text())
    assert len(data) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "influence"
    assert manifest["config"]["seed"] == "0x2a"
    assert "total_ms" in manifest["timings"]


def test_format_csv_only(capsys, tmp_path):
    assert run(capsys, "influence", "--format", "csv", "--out", str(tmp_path))[0] == EXIT_OK
    assert not (tmp_path / "influence.json").exists()
    assert (tmp_path / "influence.csv").exists()


@pytest.mark.parametrize("argv", [
    ["ns", "--n", "6", "--samples", "20000", "--seed", "11", "--delta", "0.05,0.3"],
    ["gas", "--n", "4", "--samples", "20000", "--seed", "5", "--method", "both"],
    ["fool", "--prg", "gauss", "--n", "4", "--N", "8", "--k", "4", "--samples", "4000", "--seed", "9"],
])
def test_reruns_byte_identical_across_threads(capsys, tmp_path, argv):
    texts = []
    for i, threads in enumerate(["1", "4", "1"]):
        d = tmp_path / str(i)
        assert run(capsys, *argv, "--threads", threads, "--out", str(d))[0] == EXIT_OK
        texts.append(((d / f"{argv[0]}.csv").read_bytes(), (d / f"{argv[0]}.json").read_bytes()))
    assert texts[0] == texts[1] == texts[2]


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 3\n[ns]\nn = 5\nd = 2\nexact = true\ndelta = "0.25"\n')
    code, out, _ = run(capsys, "ns", "--config", str(cfg))
    assert code == EXIT_OK
    (r,) = rows(out)
    assert r["delta"] == "0.25" and r["samples"] == "exact"
    # flags override the file
    code, out, _ = run(capsys, "ns", "--config", str(cfg), "--delta", "0.5")
    assert rows(out)[0]["delta"] == "0.5"


@pytest.mark.parametrize("argv", [
    ["ns", "--delta", "1.5"],
    ["ns", "--delta", "abc"],
    ["ns", "--samples", "1"],
    ["influence", "--seed", "-3"],
    ["influence", "--format", "xml"],
    ["influence", "--poly", "/nonexistent/poly.json"],
    ["influence", "--poly", "{not json"],
    ["prg-bern", "--k", "2", "--d", "1"],
    ["as", "--n", "30", "--exact"],
    ["nosuch"],
])
def test_invalid_input_exit_code(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_INVALID
    assert out == ""


def test_invalid_run_writes_nothing(capsys, tmp_path):
    out = tmp_path / "res"
    assert run(capsys, "ns", "--delta", "2", "--out", str(out))[0] == EXIT_INVALID
    assert not out.exists()


def test_unknown_toml_key(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[ns]\nbogus = 1\n")
    code, _, err = run(capsys, "ns", "--config", str(cfg))
    assert code == EXIT_INVALID and "bogus" in err


def test_bad_toml_and_missing_config(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("n = = 3\n")
    assert run(capsys, "ns", "--config", str(cfg))[0] == EXIT_INVALID
    assert run(capsys, "ns", "--config", str(tmp_path / "missing.toml"))[0] == EXIT_INVALID


def test_inline_poly(capsys, tmp_path):
    poly = '{"n": 2, "terms": [{"mask": 1, "coef": 1.0}, {"mask": 2, "coef": 1.0}]}'
    path = tmp_path / "p.json"
    path.write_text(poly)
    for src in (poly, str(path)):
        code, out, err = run(capsys, "influence", "--poly", src)
        assert code == EXIT_OK, err
        assert [float(r["estimate"]) for r in rows(out)] == [1.0, 1.0]
