import csv
import json

import pytest

from models.experiment import Analysis, CheckTolerances, ExperimentReport, ExperimentSpec
from models.minimize_result import MinimizeConfig
from models.params import SystemParams
from utils.errors import SchemaError, ValidationError
from utils.harness import (
    collision_matrix,
    collision_summary,
    dump_spec,
    emit_report,
    emit_sweep,
    load_spec,
    mass_sweep_specs,
    order_pair_specs,
    run_experiment,
    sweep,
    validate_input,
)

QUICK = MinimizeConfig(grid_size=32, eps_schedule=(1e-2, 1e-4), grad_tol=1e-6)


def document(**problem):
    base = {"masses": [1, 1], "alpha": 1.0, "q_i": [-1, 1], "q_f": [-1.5, 1.5]}
    base.update(problem)
    return {"name": "pair", "problem": base, "minimize": {"grid_size": 32}}


def quick_spec(q_i=(-1.0, 1.0), q_f=(-1.5, 1.5), **kwargs):
    kwargs.setdefault("minimize", QUICK)
    return ExperimentSpec(params=SystemParams(masses=(1.0, 1.0)), q_i=q_i, q_f=q_f, **kwargs)


class TestValidation:
    def test_valid_document(self):
        spec = validate_input(document())
        assert spec.params.masses == (1.0, 1.0)
        assert spec.minimize.grid_size == 32
        assert spec.T2 == 1.0

    def test_missing_masses(self):
        data = document()
        del data["problem"]["masses"]
        with pytest.raises(SchemaError) as excinfo:
            validate_input(data)
        assert excinfo.value.field == "problem.masses"

    def test_alpha_out_of_range(self):
        with pytest.raises(SchemaError, match=r"\(0, 2\)") as excinfo:
            validate_input(document(alpha=2.5))
        assert excinfo.value.field == "problem.alpha"

    def test_interval(self):
        with pytest.raises(SchemaError) as excinfo:
            validate_input(document(T1=1.0, T2=1.0))
        assert excinfo.value.field == "problem.T2"

    def test_off_center_endpoint(self):
        with pytest.raises(SchemaError) as excinfo:
            validate_input(document(q_i=[0, 1]))
        assert excinfo.value.field == "problem.q_i"

    def test_unknown_analysis_field(self):
        data = document()
        data["analysis"] = {"plots": True}
        with pytest.raises(SchemaError) as excinfo:
            validate_input(data)
        assert excinfo.value.field == "analysis.plots"

    def test_seed_type(self):
        data = document()
        data["seed"] = "seven"
        with pytest.raises(SchemaError) as excinfo:
            validate_input(data)
        assert excinfo.value.field == "seed"

    def test_round_trip(self, tmp_path):
        spec = validate_input(document())
        target = tmp_path / "spec.json"
        dump_spec(spec, target)
        assert load_spec(target) == spec

    def test_bad_json_names_the_line(self, tmp_path):
        target = tmp_path / "spec.json"
        target.write_text('{\n  "problem": {\n    "masses": [1, 1],,\n}')
        with pytest.raises(SchemaError) as excinfo:
            load_spec(target)
        assert excinfo.value.field.startswith("line")


class TestTolerances:
    def test_exponent_window(self):
        assert CheckTolerances().exponent_window(SystemParams(masses=(1, 1))) == (0.6, 0.74)

    def test_explicit_window(self):
        tolerances = CheckTolerances(exponent_low=0.5, exponent_high=0.8)
        assert tolerances.exponent_window(SystemParams(masses=(1, 1))) == (0.5, 0.8)

    def test_positive(self):
        with pytest.raises(ValidationError):
            CheckTolerances(eom_residual=0.0)


class TestSweep:
    def test_empty(self):
        assert sweep([]) == []

    def test_duplicate_output_dirs(self):
        specs = [quick_spec(output_dir="runs/a"), quick_spec(output_dir="runs/a")]
        with pytest.raises(ValidationError):
            sweep(specs)

    def test_parallelism(self):
        with pytest.raises(ValidationError):
            sweep([quick_spec()], parallelism=0)

    def test_errors_are_reports(self):
        bad = quick_spec(q_i=(0.0, 1.0), name="bad")
        report = sweep([bad])[0]
        assert report.name == "bad"
        assert report.status == "error"
        assert report.exit_code == 2
        assert "ValidationError" in report.error

    def test_order_pairs(self):
        specs = order_pair_specs(quick_spec(output_dir="runs"))
        assert [s.name for s in specs] == [
            "(1,2)->(1,2)",
            "(1,2)->(2,1)",
            "(2,1)->(1,2)",
            "(2,1)->(2,1)",
        ]
        assert specs[1].q_i == (-0.5, 0.5)
        assert specs[1].q_f == (0.5, -0.5)
        assert specs[3].output_dir.endswith("003")

    def test_mass_sweep_specs(self):
        specs = mass_sweep_specs(quick_spec(output_dir="runs"), [(1.0, 1.0), (1.0, 2.5)])
        assert len(specs) == 8
        assert specs[0].name == "m=1,1 (1,2)->(1,2)"
        assert specs[5].name == "m=1,2.5 (1,2)->(2,1)"
        assert specs[5].params.masses == (1.0, 2.5)
        assert specs[5].output_dir.replace("\\", "/").endswith("m01/001")
        for spec in specs:
            assert spec.q_i[0] * spec.params.masses[0] + spec.q_i[1] * spec.params.masses[1] == pytest.approx(0.0, abs=1e-12)

    def test_collision_summary(self):
        reports = [
            ExperimentReport("a", "passed", "(1,2)", "(1,2)", True, [1.0, 1.0], collision_count=0),
            ExperimentReport("b", "passed", "(1,2)", "(2,1)", False, [1.0, 1.0], collision_count=1),
            ExperimentReport("c", "failed", "(2,1)", "(1,2)", False, [1.0, 1.0], collision_count=3),
            ExperimentReport("d", "passed", "(2,1)", "(1,2)", False, [1.0, 2.5], collision_count=1),
            ExperimentReport("e", "not_converged", "(2,1)", "(1,2)", False, [1.0, 1.0], collision_count=9),
            ExperimentReport("f", "passed", "(1,2)", "(2,1)", False, [1.0, 1.0]),
        ]
        summary = collision_summary(reports)
        assert summary["excluded"] == ["e", "f"]
        assert summary["by_masses"]["1,1"] == {
            "same_order_runs": 1,
            "same_order_colliding": 0,
            "different_order_runs": 2,
            "max_collisions": 3,
            "histogram": {"1": 1, "3": 1},
        }
        assert summary["by_masses"]["1,2.5"]["max_collisions"] == 1

    def test_collision_matrix(self):
        reports = [
            ExperimentReport("a", "passed", "(1,2)", "(1,2)", collision_count=0),
            ExperimentReport("b", "failed", "(1,2)", "(2,1)", collision_count=1),
            ExperimentReport("c", "not_converged", "(2,1)", "(1,2)", collision_count=3),
        ]
        labels, matrix = collision_matrix(reports)
        assert labels == ["(1,2)", "(2,1)"]
        assert matrix == [[0, 1], [None, None]]


class TestEmit:
    def test_report_json_has_no_timings(self, tmp_path):
        report = run_experiment(quick_spec(q_i=(0.0, 1.0)))
        out = emit_report(report, tmp_path / "bad")
        data = json.loads((out / "report.json").read_text())
        assert data["status"] == "error"
        assert "timings" not in data
        assert "total" in json.loads((out / "timings.json").read_text())
        assert (out / "report.txt").read_text().startswith("experiment experiment: error")
        assert not (out / "path.json").exists()

    def test_sweep_matrix_file(self, tmp_path):
        reports = [ExperimentReport("a", "passed", "(1,2)", "(2,1)", collision_count=1)]
        emit_sweep(reports, tmp_path)
        with open(tmp_path / "collision_matrix.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows == [["order_i", "(1,2)", "(2,1)"], ["(1,2)", "", "1"], ["(2,1)", "", ""]]

    def test_sweep_over_masses(self, tmp_path):
        reports = [
            ExperimentReport("a", "passed", "(1,2)", "(2,1)", False, [1.0, 1.0], collision_count=1),
            ExperimentReport("b", "passed", "(1,2)", "(2,1)", False, [1.0, 3.0], collision_count=2),
        ]
        emit_sweep(reports, tmp_path)
        assert not (tmp_path / "collision_matrix.csv").exists()
        with open(tmp_path / "collision_matrix_m01.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[1] == ["(1,2)", "", "2"]
        summary = json.loads((tmp_path / "sweep_summary.json").read_text())
        assert summary["by_masses"]["1,3"]["histogram"] == {"2": 1}
        assert summary["excluded"] == []


class TestAnalysisSwitches:
    def test_same_order_without_detection(self):
        report = run_experiment(quick_spec(analysis=Analysis(collisions=False)))
        assert report.collision_count is None
        assert "collision_free" not in report.checks
        assert "min_gap" in report.checks
        assert collision_summary([report])["excluded"] == [report.name]

    def test_swap_without_detection(self):
        report = run_experiment(quick_spec(q_f=(1.0, -1.0), analysis=Analysis(collisions=False)))
        assert report.collision_count is None
        assert report.checks == {}
        assert report.sections == []



@pytest.mark.slow
class TestRuns:
    def test_same_order_passes(self, tmp_path):
        report = run_experiment(quick_spec())
        assert report.status == "passed"
        assert report.same_order
        assert report.collision_count == 0
        assert report.checks["eom_residual"]

        out = emit_report(report, tmp_path)
        for name in ("path.json", "trace.csv", "gaps.csv"):
            assert (out / name).exists()

    def test_swap_collides_once(self):
        spec = quick_spec(q_f=(1.0, -1.0), minimize=MinimizeConfig(grid_size=128, grad_tol=1e-6))
        report = run_experiment(spec)
        assert report.status == "passed"
        assert report.collision_count == 1
        assert report.sections == ["(1,2)", "(2,1)"]
        assert not report.repeated_sections
        assert report.checks["exponent_window"]
        assert report.checks["limit_central_configuration"]
        assert report.checks["limit_order"]
        assert report.events[0].cc_residual[0] < 1e-2
        assert abs(report.events[0].fit_t0[0] - 0.5) < 0.05

    def test_reports_are_reproducible(self, tmp_path):
        first = emit_report(run_experiment(quick_spec()), tmp_path / "a")
        second = emit_report(run_experiment(quick_spec()), tmp_path / "b")
        assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()

    def test_parallel_sweep_is_byte_identical(self, tmp_path):
        specs = order_pair_specs(quick_spec())
        serial = sweep(specs, parallelism=1)
        parallel = sweep(specs, parallelism=8)
        for index, (a, b) in enumerate(zip(serial, parallel)):
            first = emit_report(a, tmp_path / "serial" / f"{index:03d}")
            second = emit_report(b, tmp_path / "parallel" / f"{index:03d}")
            assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()

    def test_three_body_order_pairs(self):
        base = ExperimentSpec(
            params=SystemParams(masses=(1.0, 1.0, 1.0)),
            q_i=(-1.0, 0.0, 1.0),
            q_f=(-1.0, 0.0, 1.0),
            minimize=MinimizeConfig(grid_size=64, grad_tol=1e-6),
        )
        reports = sweep(order_pair_specs(base), parallelism=4)
        assert len(reports) == 36
        converged = [r for r in reports if r.status in ("passed", "failed")]
        assert converged
        for r in converged:
            if r.same_order:
                assert r.collision_count == 0, r.name
            else:
                assert 1 <= r.collision_count <= 5, r.name
                assert not r.repeated_sections, r.name
