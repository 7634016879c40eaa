import json
import struct

import numpy as np
import pytest

from gowerslab.cli import main
from gowerslab.grid import Ball, Box, GridSpec, Union, rasterize
from gowerslab.io import FormatError, dumps, read_grid, read_rows, read_shape, shape_hash, write_grid, write_shape
from gowerslab.rearrange import Profile1D


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, doc in {
        "interval": {"kind": "box", "lo": [0.0], "hi": [1.0]},
        "empty": {"kind": "empty", "d": 1},
        "ball2d": {"shape": {"kind": "ball", "center": [0.0, 0.0], "radius": 0.5}, "grid": {"n": 128}},
        "two": {"kind": "union", "parts": [{"kind": "box", "lo": [-1.0], "hi": [-0.5]},
                                            {"kind": "box", "lo": [0.5], "hi": [1.0]}]},
    }.items():
        p = tmp_path / f"{name}.spec"
        p.write_text(json.dumps(doc))
        paths[name] = p
    return paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    rows = [json.loads(ln) for ln in out.splitlines() if ln.startswith("{")]
    return code, rows


def test_grid_roundtrip(tmp_path):
    g = rasterize(Ball([0.1, -0.2, 0.0], 0.4), GridSpec(3, 1.0, 12))
    p = tmp_path / "g.gwrs"
    write_grid(p, g)
    raw = p.read_bytes()
    assert raw[:4] == b"GWRS"
    assert struct.unpack_from("<II3Id", raw, 4) == (1, 3, 12, 12, 12, 1.0)
    h = read_grid(p)
    assert h.spec == g.spec and np.array_equal(h.values, g.values)


def test_grid_format_errors(tmp_path):
    p = tmp_path / "bad.gwrs"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(FormatError):
        read_grid(p)
    g = rasterize(Ball([0.0], 0.4), GridSpec(1, 1.0, 8))
    write_grid(p, g)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError):
        read_grid(p)


def test_shape_files(tmp_path):
    shape = Union((Box([0, 0], [1, 1]), Ball([2.0, 2.0], 0.25)))
    p = tmp_path / "s.json"
    write_shape(p, shape, {"n": 64})
    back, grid = read_shape(p)
    assert grid == {"n": 64} and shape_hash(back) == shape_hash(shape)
    p.write_text("{not json")
    with pytest.raises(FormatError):
        read_shape(p)


def test_canonical_floats():
    text = dumps({"b": 0.1, "a": [1 / 3, 2.0, 3, True, None]})
    assert text == '{"a":[0.33333333333333331,2.0,3,true,null],"b":0.10000000000000001}'
    assert json.loads(text)["a"][0] == 1 / 3


def test_norm_interval(files, capsys):
    code, rows = run(capsys, "norm", "--shape", files["interval"], "--k", "2", "--n", "1024")
    assert code == 0 and rows[0]["power_value"] == pytest.approx(2 / 3, abs=1e-3)
    code, rows = run(capsys, "norm", "--shape", files["interval"], "--method", "fourier")
    assert code == 0 and rows[0]["method"] == "fourier-u2"


def test_norm_empty_and_star(files, capsys):
    code, rows = run(capsys, "norm", "--shape", files["empty"])
    assert code == 0 and rows[0]["power_value"] == 0
    code, rows = run(capsys, "norm", "--shape", files["ball2d"], "--k", "2", "--compare-star")
    assert code == 0 and rows[0]["star_ratio"] == pytest.approx(1.0, abs=1e-6)


def test_chain_commands(files, capsys, tmp_path):
    code, rows = run(capsys, "chain", "--shape", files["two"], "--k", "2", "--assert-monotone")
    c = rows[0]["chain"]
    assert code == 0 and c[0] < c[1] < c[2]
    code, rows = run(capsys, "chain", "--shape", files["ball2d"], "--k", "2", "--mode", "binary")
    assert code == 0 and rows[0]["spread"] < 1e-8
    # an increasing "f_*" profile inverts the chain
    bad = tmp_path / "corrupt.tsv"
    bad.write_text(Profile1D([0.0, 0.5, 1.0, 1.5], [0.1, 0.2, 5.0, 0.0], "step").to_text())
    code, _ = run(capsys, "chain", "--shape", files["two"], "--profile", bad, "--assert-monotone")
    assert code == 4
    garbage = tmp_path / "garbage.tsv"
    garbage.write_text("hello\n")
    code, _ = run(capsys, "chain", "--shape", files["two"], "--profile", garbage)
    assert code == 2


def test_rearrange_command(files, capsys, tmp_path):
    code, rows = run(capsys, "rearrange", "--shape", files["interval"], "--at", "1", "--bathtub-check",
                     "--prefix", tmp_path / "iv")
    assert code == 0 and rows[0]["bathtub_ok"]
    assert rows[0]["F_at"][0][1] == pytest.approx(0.75, abs=1e-3)
    F = Profile1D.from_text((tmp_path / "iv.F.tsv").read_text())
    assert float(F(1.0)) == pytest.approx(0.75, abs=1e-3)
    assert read_grid(tmp_path / "iv.star.gwrs").measure() == pytest.approx(1.0)
    code, rows = run(capsys, "rearrange", "--shape", files["empty"])
    assert code == 0 and rows[0]["F_total"] == 0


def test_rearrange_grid_input(capsys, tmp_path):
    g = rasterize(Box([0.0], [1.0]), GridSpec(1, 2.0, 512))
    write_grid(tmp_path / "in.gwrs", g)
    code, rows = run(capsys, "rearrange", "--grid-file", tmp_path / "in.gwrs", "--at", "1")
    assert code == 0 and rows[0]["F_at"][0][1] == pytest.approx(0.75, abs=1e-3)


def test_stability_command(capsys, tmp_path):
    out = tmp_path / "rec.jsonl"
    plot = tmp_path / "plot.tsv"
    code, _ = run(capsys, "stability", "--amplitudes", "0", "--seeds", "2", "--n", "96",
                  "--output", out, "--plot-table", plot)
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 2 and all(r["epsilon"] <= 0.02 for r in rows)
    assert plot.read_text().startswith("# delta\tepsilon")
    code, _ = run(capsys, "stability", "--amplitudes", "0", "--output", tmp_path / "missing" / "x.jsonl")
    assert code == 2


def test_stability_default_sweep_is_monotone(capsys):
    code, rows = run(capsys, "stability", "--assert-monotone", "--n", "128")
    assert code == 0 and len(rows) == 40


def test_byte_identical_reruns(files, tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        assert main(["chain", "--shape", str(files["two"]), "--k", "3", "--n", "512", "--output", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes(files, capsys, tmp_path, monkeypatch):
    assert main(["norm", "--shape", str(tmp_path / "nope.spec")]) == 2
    assert main(["norm", "--shape", str(files["interval"]), "--k", "6", "--budget", "1e3"]) == 3
    assert main(["norm", "--shape", str(files["interval"]), "--method", "fourier", "--k", "3"]) == 2
    assert main(["norm", "--shape", str(files["interval"]), "--extent", "0.5"]) == 2
    monkeypatch.setenv("GWRS_THREADS", "zero")
    assert main(["norm", "--shape", str(files["interval"])]) == 2
    assert main(["norm", "--shape", str(files["interval"]), "--threads", "2"]) == 0
    with pytest.raises(SystemExit) as exc:
        main(["norm"])
    assert exc.value.code == 2


@pytest.mark.parametrize("cmd", ["norm", "chain", "stability", "rearrange"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert "=" in capsys.readouterr().out


def test_pretty(files, capsys):
    assert main(["norm", "--shape", str(files["interval"]), "--pretty"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split()[0] == "k"
