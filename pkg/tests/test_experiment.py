import json

import numpy as np
import pytest

from snapreg import io
from snapreg.errors import ConfigError, ParseError
from snapreg.experiment import (
    CSV_HEADER,
    PETERSEN_DEMO,
    ExperimentConfig,
    check_lines,
    emit_csv,
    emit_plot_script,
    emit_report,
    fit_external,
    fit_states,
    run,
    write_outputs,
)
from snapreg.regression import fit_batch
from snapreg.system import SnapshotLog


def cfg(**kw):
    base = {"system": {"spectrum": [2, 2, 3, 5]}, "steps": 8, "seed": 1}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


class TestConfig:
    @pytest.mark.parametrize(
        "data, field",
        [
            ({"system": {}}, "system"),
            ({"system": {"matrix": [[1]], "spectrum": [1]}}, "system"),
            ({"system": {"spectrum": [1]}, "steps": 0}, "steps"),
            ({"system": {"spectrum": [1]}, "steps": 2.5}, "steps"),
            ({"system": {"spectrum": [1]}, "rank_tolerance": -1}, "rank_tolerance"),
            ({"system": {"spectrum": [1]}, "norms": ["nuclear"]}, "norms"),
            ({"system": {"spectrum": [1]}, "bogus": 1}, "bogus"),
            ({"system": {"spectrum": [1]}, "initial_condition": {}}, "initial_condition"),
            ({"steps": 3}, "system"),
        ],
    )
    def test_invalid_fields_are_named(self, data, field):
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict(data)
        assert exc.value.field == field

    @pytest.mark.parametrize(
        "system, field",
        [
            ({"matrix": [[1, 2, 3]]}, "system.matrix"),
            ({"spectrum": []}, "system.spectrum"),
            ({"generator": "cube"}, "system.generator"),
            ({"generator": "petersen_weighted", "dt": -1}, "system.dt"),
            ({"generator": "petersen_weighted", "method": "rk4"}, "system.method"),
        ],
    )
    def test_invalid_system_sources(self, system, field):
        with pytest.raises(ConfigError) as exc:
            run(ExperimentConfig.from_dict({"system": system}))
        assert exc.value.field == field

    def test_bad_vector(self):
        c = ExperimentConfig.from_dict({"system": {"spectrum": [1, 2]}, "initial_condition": {"vector": [1, 2, 3]}})
        with pytest.raises(ConfigError, match="initial_condition.vector"):
            run(c)

    def test_orthogonal_mode(self):
        c = cfg(initial_condition={"gaussian": True, "orthogonal_to": [0]})
        r = run(c)
        q0 = r.system.profile.Q_full[:, 0]
        assert abs(q0 @ r.x0) < 1e-12
        assert np.linalg.norm(r.x0) == pytest.approx(1.0)

    def test_overrides(self):
        c = cfg().with_overrides(seed=5, steps=None, out_dir="x", rank_tolerance=1e-8)
        assert (c.seed, c.steps, c.out_dir, c.rank_tolerance) == (5, 8, "x", 1e-8)
        with pytest.raises(ConfigError, match="steps"):
            cfg().with_overrides(steps=0)

    def test_load(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(PETERSEN_DEMO))
        assert ExperimentConfig.load(p).to_dict() == PETERSEN_DEMO
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(p)


class TestRun:
    def test_repeated_spectrum(self):
        r = run(cfg())
        assert [rec.k for rec in r.records] == list(range(1, 9))
        for rec in r.records:
            if rec.k >= 3:
                assert abs(rec.empirical_spectral - 2.0) <= 1e-8
                assert rec.observed_rank == 3
        assert r.records[-1].observed_rank == 3

    def test_identity_degenerate(self):
        r = run(ExperimentConfig.from_dict({"system": {"matrix": [[1, 0], [0, 1]]}, "steps": 3}))
        assert r.records[0].degenerate
        assert r.records[0].thm1_bound is None

    def test_deterministic_bytes(self, tmp_path):
        a = emit_csv(run(cfg()).records, tmp_path / "a.csv").read_bytes()
        b = emit_csv(run(cfg()).records, tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_nonsymmetric_runs(self):
        A = [[0.5, 0.2, 0.0], [0.0, 0.4, 0.1], [0.3, 0.0, 0.6]]
        r = run(ExperimentConfig.from_dict({"system": {"matrix": A}, "steps": 4}))
        assert all(rec.predicted_rank is None for rec in r.records)
        assert any(line.startswith("thm1: PASS") for line in check_lines(r))


class TestEmit:
    def test_csv_shape(self, tmp_path):
        recs = run(cfg(steps=3)).records
        text = emit_csv(recs, tmp_path / "r.csv").read_text().splitlines()
        assert len(text) == 4
        assert text[0] == CSV_HEADER
        assert all(len(line.split(",")) == 11 for line in text)

    def test_absent_fields_empty(self, tmp_path):
        recs = run(cfg(steps=3)).records
        row = emit_csv(recs, tmp_path / "r.csv").read_text().splitlines()[1].split(",")
        # k = 1 < s: no thm4 and no lemma3 value, thm2 inapplicable (repeated eigenvalue)
        assert row[6] == row[7] == row[8] == row[10] == ""
        assert row[9] == "false"

    def test_report_repeated(self, tmp_path):
        text = emit_report(run(cfg()), tmp_path / "rep.txt").read_text()
        assert "thm4: PASS" in text
        assert "measured spectral" in text and "predicted" in text
        assert "seed: 1" in text

    def test_report_all_simple(self, tmp_path):
        r = run(ExperimentConfig.from_dict({"system": {"spectrum": [0.5, -1.0, 1.2, 0.8]}, "steps": 5}))
        text = emit_report(r, tmp_path / "rep.txt").read_text()
        assert "thm4: N/A (all eigenvalues simple)" in text
        assert "thm2: PASS" in text
        assert "exact recovery: PASS" in text

    def test_plot_script_compiles(self, tmp_path):
        recs = run(cfg(steps=4)).records
        src = emit_plot_script(recs, tmp_path / "plot.py").read_text()
        compile(src, "plot.py", "exec")
        assert "RECORDS" in src and "plot.png" in src

    def test_unwritable(self, tmp_path):
        recs = run(cfg(steps=2)).records
        with pytest.raises(OSError):
            emit_csv(recs, tmp_path / "missing" / "r.csv")


class TestFit:
    def test_round_trip(self, tmp_path):
        c = ExperimentConfig.from_dict({"system": {"spectrum": [0.9, -0.6, 1.2, 0.4, -1.1]}, "steps": 7, "seed": 2})
        r = run(c)
        paths = write_outputs(r, tmp_path)
        result, out = fit_external(paths["trajectory"], out_dir=tmp_path / "fit")
        np.testing.assert_array_equal(result.estimate, r.estimate)
        assert out["model"].read_bytes() == paths["estimate"].read_bytes()
        assert np.linalg.norm(result.estimate - r.system.A) <= 1e-8 * np.linalg.norm(r.system.A)
        np.testing.assert_array_equal(result.estimate, fit_batch(SnapshotLog(r.log.states)))

    def test_two_rows(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2\n3,4\n")
        result, _ = fit_external(p)
        assert result.steps[-1].rank == 1
        assert result.steps[-1].residual == pytest.approx(0.0, abs=1e-14)

    def test_nan_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2\n3,nan\n")
        with pytest.raises(ParseError) as exc:
            fit_external(p)
        assert (exc.value.row, exc.value.column) == (2, 2)

    def test_non_numeric_and_ragged(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1,2\nx,4\n")
        with pytest.raises(ParseError, match="row 2, column 1"):
            fit_external(p)
        p.write_text("1,2\n3\n")
        with pytest.raises(ParseError, match="ragged"):
            fit_external(p)

    def test_rank_history(self):
        states = np.array([[1.0, 2.0, 4.0, 8.0], [0.0, 0.0, 0.0, 0.0]])
        res = fit_states(states)
        assert [s.rank for s in res.steps] == [1, 1, 1]


def test_matrix_file_round_trip(tmp_path, rng):
    M = rng.standard_normal((3, 4))
    p = io.write_matrix(tmp_path / "m.csv", M)
    assert p.read_text().splitlines()[0] == "# 3 4"
    np.testing.assert_array_equal(io.read_matrix(p), M)
    p.write_text("# 2 2\n1,2\n")
    with pytest.raises(ParseError):
        io.read_matrix(p)
