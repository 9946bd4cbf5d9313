import json

import jsonschema
import numpy as np
import pytest

from envcap import bounds as bd
from envcap.channel import preset_path
from envcap.cli import (
    EXIT_CONFIG,
    EXIT_INPUT,
    EXIT_INVARIANT,
    EXIT_NONCONVERGED,
    EXIT_OK,
    ConfigError,
    RunConfig,
    emit,
    main,
    report_schema,
    run,
)

DEPOL = str(preset_path("depolarizing_qubit"))
AD = str(preset_path("amplitude_damping_qubit"))
SUBSPACE = str(preset_path("random_subspace_3x3"))


def test_run_depolarizing_q_capacity():
    config = RunConfig(spec_paths=(DEPOL,), analyses=("q_capacity",), seed=1)
    report, status = run(config)
    assert status == EXIT_OK
    entry = report["entries"][0]
    assert entry["name"] == "assisted-quantum-capacity"
    assert entry["value"] == pytest.approx(1.0, abs=1e-3)
    assert report["chain"]["violations"] == []


def test_run_metric_suite_small():
    config = RunConfig(
        spec_paths=(), analyses=("metric_suite",), seed=5, tolerances={"metric_pairs": 300}
    )
    report, status = run(config)
    assert status == EXIT_OK
    entry = report["entries"][0]
    assert entry["value"] == 0.0
    assert entry["params"]["pairs"] == 300


def test_run_missing_input_file():
    config = RunConfig(spec_paths=("/nonexistent/channel.json",), analyses=("q_capacity",), seed=1)
    report, status = run(config)
    assert status == EXIT_INPUT
    assert "error" in report
    assert "entries" not in report


def test_run_malformed_spec(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"type": "depolarizing", "dims": {"a": 2, "b": 3, "c": 4}, "noise": 0.1}))
    config = RunConfig(spec_paths=(str(bad),), analyses=("q_capacity",), seed=1)
    report, status = run(config)
    assert status == EXIT_INPUT
    assert "dims" in report["error"]


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        RunConfig(spec_paths=(DEPOL,), analyses=(), seed=1)
    with pytest.raises(ConfigError):
        RunConfig(spec_paths=(DEPOL,), analyses=("warp_drive",), seed=1)
    with pytest.raises(ConfigError):
        RunConfig(spec_paths=(DEPOL,), analyses=("q_capacity",), seed=-1)
    with pytest.raises(ConfigError):
        RunConfig(spec_paths=(), analyses=("q_capacity",), seed=1)
    with pytest.raises(ConfigError):
        RunConfig(spec_paths=(DEPOL,), analyses=("q_capacity",), seed=1, tolerances={"nope": 1})


def test_main_exit_codes(tmp_path, capsys):
    assert main(["--analyses", "q_capacity"]) == EXIT_CONFIG  # no spec
    assert main(["--spec", DEPOL, "--analyses", "nope"]) == EXIT_CONFIG
    assert main(["--spec", "/missing.json", "--analyses", "q_capacity"]) == EXIT_INPUT
    out = tmp_path / "r.json"
    code = main(["--spec", DEPOL, "--analyses", "q_capacity", "--seed", "2", "--out", str(out)])
    assert code == EXIT_OK
    assert out.exists()


def test_json_determinism():
    args = dict(spec_paths=(DEPOL, AD), analyses=("q_capacity", "lower_bounds"), seed=77)
    r1, s1 = run(RunConfig(**args))
    r2, s2 = run(RunConfig(**args))
    assert s1 == s2 == EXIT_OK
    assert emit(r1, "json") == emit(r2, "json")


def test_json_roundtrips_schema():
    config = RunConfig(
        spec_paths=(SUBSPACE,),
        analyses=("q_capacity", "lower_bounds", "badziag", "upper_bounds"),
        seed=9,
    )
    report, status = run(config)
    assert status == EXIT_OK
    doc = json.loads(emit(report, "json"))
    jsonschema.validate(doc, report_schema())
    assert "wall_time_s" not in doc


def test_markdown_ordering_and_wall_time():
    config = RunConfig(
        spec_paths=(SUBSPACE,), analyses=("lower_bounds", "upper_bounds"), seed=9
    )
    report, status = run(config)
    text = emit(report, "markdown")
    assert text.index("## Lower bounds") < text.index("## Upper bounds")
    assert "wall time" in text


def test_markdown_empty_report():
    empty = {"schema": "envcap-report/1", "inputs": [], "entries": [], "chain": {"violations": []}}
    text = emit(empty, "markdown")
    assert text.startswith("# Capacity bound report")
    assert "VIOLATION" not in text


def test_csv_rows():
    config = RunConfig(spec_paths=(DEPOL,), analyses=("q_capacity", "lower_bounds"), seed=4)
    report, status = run(config)
    text = emit(report, "csv")
    lines = text.strip().split("\n")
    assert lines[0].startswith("name,value,direction")
    assert len(lines) == 1 + len(report["entries"])


def test_nonconvergence_exit_code(monkeypatch):
    def fake_q_capacity(u, config=None):
        return bd.QCapacityResult(
            value=0.5,
            rho_star=np.eye(u.dim_a) / u.dim_a,
            converged=False,
            certificate=1.0,
            branch_weight=0.5,
            evaluations=1,
        )

    monkeypatch.setattr(bd, "q_capacity", fake_q_capacity)
    report, status = run(RunConfig(spec_paths=(DEPOL,), analyses=("q_capacity",), seed=1))
    assert status == EXIT_NONCONVERGED
    assert "non-converged" in report["entries"][0]["tags"]


def test_invariant_violation_exit_code(monkeypatch):
    # a corrupted lower bound above the input bandwidth must trip the chain
    def fake_aggregate(u, *args, **kwargs):
        return bd.AggregateLowerBound(value=5.0, branch="basic[mixed]", candidates=("mixed",))

    monkeypatch.setattr(bd, "lower_bound_aggregate", fake_aggregate)
    report, status = run(RunConfig(spec_paths=(DEPOL,), analyses=("lower_bounds",), seed=1))
    assert status == EXIT_INVARIANT
    assert report["chain"]["violations"]


def test_detector_analysis_runs():
    config = RunConfig(
        spec_paths=(AD,),
        analyses=("detector",),
        seed=6,
        tolerances={"detector_epsilon": 0.1},
    )
    report, status = run(config)
    assert status == EXIT_OK
    names = [e["name"] for e in report["entries"]]
    assert "min-trace-ppt-detector[0]" in names


def test_subspace_example_analysis():
    config = RunConfig(spec_paths=(SUBSPACE,), analyses=("subspace_example",), seed=6)
    report, status = run(config)
    assert status == EXIT_OK
    by_name = {e["name"]: e for e in report["entries"]}
    assert by_name["example-conditional-upper"]["params"]["formula"] == (
        "½ log d_A + 2.5 log log d_A + 27"
    )
    assert "conditional-on-superadditivity" in by_name["example-conditional-upper"]["tags"]
