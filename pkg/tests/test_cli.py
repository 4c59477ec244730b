import csv
import json
import math
import os

import pytest

from bnsharp.cli import (ExperimentConfig, OperatorSpecError,
                         config_from_args, main, operator_parse,
                         parse_exponent, parse_sweep, run)


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_operator_parse_grammar():
    lap = operator_parse("laplacian:2", 2)
    assert lap.terms == {(2, 0): 1.0, (0, 2): 1.0}
    d1 = operator_parse("1:1,0", 1)
    assert d1.terms == {(1,): 1.0}
    mixed = operator_parse("2,0:1,0 + 0,2:0,1", 2)
    assert mixed.terms == {(2, 0): 1.0, (0, 2): 1j}
    ident = operator_parse("identity", 3)
    assert ident.order == 0


def test_operator_parse_rejects_mixed_orders():
    with pytest.raises(OperatorSpecError, match="mixed total orders"):
        operator_parse("2,0:1,0 + 0,1:1,0", 2)
    with pytest.raises(OperatorSpecError, match="term 0"):
        operator_parse("banana", 2)
    with pytest.raises(OperatorSpecError, match="length"):
        operator_parse("1,0:1,0", 1)
    with pytest.raises(OperatorSpecError):
        operator_parse("laplacian:3", 2)


def test_parse_sweep_forms():
    assert parse_sweep("4,8,16") == [4.0, 8.0, 16.0]
    geom = parse_sweep("1:100:25:geom")
    assert len(geom) == 25
    assert geom[0] == pytest.approx(1.0) and geom[-1] == pytest.approx(100.0)
    lin = parse_sweep("0:10:11:lin")
    assert lin[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        parse_sweep("1:10:5:weird")
    with pytest.raises(ValueError):
        parse_sweep("")


def test_parse_exponent():
    assert math.isinf(parse_exponent("inf"))
    assert parse_exponent("2.5") == 2.5
    with pytest.raises(ValueError):
        parse_exponent("-1")


def test_config_round_trip():
    cfg = ExperimentConfig(kind="converge", body="ball:1", m=2, p="2",
                           q="inf", a="1:10:5:geom", seed=3,
                           out="x.csv")
    again = config_from_args(cfg.to_args())
    assert again == cfg


def test_converge_csv_and_manifest(tmp_path):
    out = tmp_path / "c.csv"
    code = main(["converge", "--body", "cube:1", "--m", "1", "--p", "2",
                 "--q", "inf", "--a", "1:100:25:geom", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert rows[0] == "p,q,operator,body,a,kind,value,tolerance,seed,runtime_ms".split(",")
    assert len(rows) == 26
    last_val = float(rows[-1][6])
    assert abs(last_val - 1 / math.sqrt(math.pi)) < 0.02 / math.sqrt(math.pi)
    manifest = json.loads((tmp_path / "c.csv.manifest.json").read_text())
    assert manifest["versions"]["bnsharp"]
    assert manifest["config_sha256"]
    assert manifest["results"]["reference_E"] == \
        pytest.approx(1 / math.sqrt(math.pi))


def test_reproducible_output_modulo_runtime(tmp_path):
    args = ["optimize", "--body", "cube:1", "--m", "1", "--p", "1",
            "--q", "inf", "--a", "2", "--restarts", "2", "--iterations",
            "80", "--seed", "9"]
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    strip = lambda p: [",".join(r.split(",")[:-1])
                       for r in p.read_text().splitlines()]
    assert strip(out1) == strip(out2)


def test_levitan_check_rows(tmp_path):
    out = tmp_path / "l.csv"
    code = main(["levitan-check", "--body", "cube:1", "--m", "1",
                 "--a", "4,8,16", "--p-list", "1,2,inf", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert rows[0] == ["a", "property", "bound", "observed", "slack"]
    props = {(r[0], r[1]) for r in rows[1:]}
    assert ("4", "contraction-p=2.0") in props
    assert ("16", "pointwise-bound") in props
    # every contraction and pointwise row passes: slack >= -bound
    for r in rows[1:]:
        assert float(r[4]) >= -abs(float(r[2]))


def test_constant_subcommand_kamzolov_row(tmp_path):
    out = tmp_path / "k.csv"
    code = main(["constant", "--body", "ball:1", "--m", "2", "--p", "inf",
                 "--q", "inf", "--operator", "laplacian:2", "--a", "1",
                 "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    kinds = {r[5] for r in rows[1:]}
    assert "upper-bound" in kinds
    values = {r[5]: float(r[6]) for r in rows[1:]}
    assert values.get("exact-closed-form") == pytest.approx(2.0)


def test_candidates_subcommand(tmp_path):
    out = tmp_path / "cand.csv"
    code = main(["candidates", "--body", "cube:1", "--m", "1", "--p", "2",
                 "--q", "inf", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    by_kind = {r[5]: float(r[6]) for r in rows[1:]}
    assert by_kind["lower-bound-candidate"] == \
        pytest.approx(1 / math.sqrt(math.pi), rel=2e-2)
    assert by_kind["exact-closed-form"] == pytest.approx(1 / math.sqrt(math.pi))


def test_config_file_defaults(tmp_path):
    cfg_file = tmp_path / "exp.json"
    cfg_file.write_text(json.dumps({"body": "cube:1", "m": 1, "p": "2",
                                    "q": "inf", "a": "1,2"}))
    out = tmp_path / "from_config.csv"
    code = main(["converge", "--config", str(cfg_file), "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 3  # header + 2 sweep points


def test_usage_errors_exit_two(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["converge", "--body", "egg:1", "--m", "1",
                 "--out", str(out)]) == 2
    assert main(["constant", "--body", "cube:1", "--m", "2", "--operator",
                 "2,0:1,0 + 0,1:1,0", "--out", str(out)]) == 2
    assert main(["converge", "--body", "cube:1", "--m", "1", "--a", "",
                 "--out", str(out)]) == 2
    assert not out.exists()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["constant", "--body", "cube:1", "--m", "1", "--p", "2",
                 "--q", "inf", "--a", "1", "--out", str(out)]) == 0
    leftovers = [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]
    assert leftovers == []
