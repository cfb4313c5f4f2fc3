import json

import pytest

from snapreg.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, main
from snapreg.experiment import CSV_HEADER


def write_config(path, **kw):
    data = {"system": {"spectrum": [2, 2, 3, 5]}, "steps": 6, "seed": 4}
    data.update(kw)
    path.write_text(json.dumps(data))
    return path


def test_run(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "out")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "thm4: PASS" in out
    csv = (tmp_path / "out" / "records_seed4.csv").read_text().splitlines()
    assert csv[0] == CSV_HEADER and len(csv) == 7


def test_overrides(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert main(["run", str(cfg), "--out-dir", str(tmp_path), "--seed", "9", "--steps", "3", "--tolerance", "1e-10"]) == 0
    assert len((tmp_path / "records_seed9.csv").read_text().splitlines()) == 4
    assert "1e-10" in (tmp_path / "report_seed9.txt").read_text()


def test_fit_round_trip(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", system={"spectrum": [0.5, 1.0, -0.7]})
    main(["run", str(cfg), "--out-dir", str(tmp_path)])
    assert main(["fit", str(tmp_path / "trajectory_seed4.csv"), "--out-dir", str(tmp_path / "f")]) == EXIT_OK
    assert (tmp_path / "f" / "trajectory_seed4_model.csv").read_bytes() == (tmp_path / "estimate_seed4.csv").read_bytes()


def test_demo(tmp_path, capsys):
    assert main(["demo", "petersen", "--out-dir", str(tmp_path), "--steps", "4"]) == EXIT_OK
    assert "thm4: N/A (all eigenvalues simple)" in capsys.readouterr().out


def test_validation_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", steps=0)
    assert main(["run", str(cfg)]) == EXIT_INVALID
    assert "steps" in capsys.readouterr().err


def test_parse_error(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,2\n3,oops\n")
    assert main(["fit", str(p)]) == EXIT_INVALID


def test_io_errors(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path / "c.json")
    assert main(["run", str(cfg), "--out-dir", str(blocker / "sub")]) == EXIT_IO


def test_usage_error():
    with pytest.raises(SystemExit):
        main(["demo", "cube"])
