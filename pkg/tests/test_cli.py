"""CLI: thin-adapter byte identity, formats, exit codes."""

import json
import math

import pytest

from quadwalk import singular_steps, solve_drift, validate_steps
from quadwalk.cli import main
from quadwalk.dp import ExitSpec, count_paths, survival_prob
from quadwalk.montecarlo import simulate_survival
from quadwalk.pipeline import ConditionedWalkPipeline


@pytest.fixture(scope="module")
def steps_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("steps") / "singular.json"
    path.write_text(json.dumps({"steps": [
        {"dx": 1, "dy": -1, "w": 1}, {"dx": 1, "dy": 1, "w": 1},
        {"dx": -1, "dy": 1, "w": 1}]}))
    return str(path)


@pytest.fixture(scope="module")
def tilted_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("steps") / "tilted.json"
    path.write_text(json.dumps({"steps": [
        {"dx": 1, "dy": -1, "w": 2}, {"dx": 1, "dy": 1, "w": 1},
        {"dx": -1, "dy": 1, "w": 1}]}))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_count_golden(capsys, steps_file):
    code, out, _ = run_cli(capsys, "--steps", steps_file, "dp", "count",
                           "--x", "1,1", "--y", "3,1", "--n", "2")
    assert code == 0
    assert out == "1\n"


def test_tilt_solve_golden(capsys, steps_file):
    code, out, _ = run_cli(capsys, "--steps", steps_file, "tilt", "solve",
                           "--drift", "0.5,0")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "h1,h2,phi"
    tp = solve_drift(singular_steps(), (0.5, 0.0))
    assert row == f"{tp.h[0]!r},{tp.h[1]!r},{tp.phi!r}"
    assert float(row.split(",")[1]) == pytest.approx(-0.5 * math.log(2), abs=1e-12)


def test_dp_survive_byte_identity(capsys, tilted_file):
    code, out, _ = run_cli(capsys, "--steps", tilted_file, "dp", "survive",
                           "--x", "1,1", "--n", "50")
    assert code == 0
    sd = validate_steps([((1, -1), 2), ((1, 1), 1), ((-1, 1), 1)])
    p, err = survival_prob(sd, (1, 1), 50, ExitSpec(), barrier="auto")
    assert out.strip().splitlines()[1] == f"50,{p!r},{err!r}"


def test_mc_byte_identity(capsys, tilted_file):
    code, out, _ = run_cli(capsys, "--steps", tilted_file, "--seed", "77",
                           "mc", "survive", "--x", "1,1", "--n", "10",
                           "--reps", "10000")
    assert code == 0
    sd = validate_steps([((1, -1), 2), ((1, 1), 1), ((-1, 1), 1)])
    est = simulate_survival(sd, (1, 1), 10, 10000, seed=77)
    assert out.strip().splitlines()[1] == (
        f"{est.mean!r},{est.half_width_95!r},10000,77")


def test_mc_seed_after_subcommand(capsys, tilted_file):
    # the seed is also accepted in trailing position
    code_a, out_a, _ = run_cli(capsys, "--steps", tilted_file, "mc",
                               "survive", "--x", "1,1", "--n", "10",
                               "--reps", "10000", "--seed", "77")
    code_b, out_b, _ = run_cli(capsys, "--steps", tilted_file, "--seed", "77",
                               "mc", "survive", "--x", "1,1", "--n", "10",
                               "--reps", "10000")
    assert code_a == code_b == 0
    assert out_a == out_b


def test_harmonic_w_byte_identity(capsys, tilted_file):
    code, out, _ = run_cli(capsys, "--steps", tilted_file, "harmonic-w",
                           "--x", "2,3")
    assert code == 0
    sd = validate_steps([((1, -1), 2), ((1, 1), 1), ((-1, 1), 1)])
    est = ConditionedWalkPipeline.build(sd).w((2, 3))
    row = out.strip().splitlines()[1]
    assert row == f"2,3,{est.lower!r},{est.value!r},{est.upper!r},{est.n_used}"


def test_renewal_csv(capsys, tilted_file):
    code, out, _ = run_cli(capsys, "--steps", tilted_file, "renewal",
                           "--kind", "V", "--max-u", "3")
    assert code == 0
    from quadwalk.ladders import descending_ladder, renewal_V
    sd = validate_steps([((1, -1), 2), ((1, 1), 1), ((-1, 1), 1)])
    table = renewal_V(descending_ladder(sd), 3)
    expected = ["u,value"] + [f"{u},{float(table.values[u])!r}" for u in range(4)]
    lines = out.strip().splitlines()
    assert lines == expected
    assert [float(l.split(",")[1]) for l in lines[1:]] == pytest.approx(
        [2.0, 4.0, 6.0, 8.0], rel=1e-12)


def test_ladders_output(capsys, tilted_file):
    code, out, err = run_cli(capsys, "--steps", tilted_file, "ladders",
                             "--dir", "down")
    assert code == 0
    assert out.splitlines()[0] == "value,prob"
    assert "mean=" in err


def test_json_format_has_schema_version(capsys, tilted_file):
    code, out, _ = run_cli(capsys, "--steps", tilted_file, "--format", "json",
                           "model", "moments")
    assert code == 0
    obj = json.loads(out)
    assert obj["schema_version"] == "1"
    assert obj["result"][0]["mu1"] == 0.5


def test_verify_csv_header(capsys, tilted_file):
    code, out, _ = run_cli(capsys, "--steps", tilted_file, "verify", "tail",
                           "--x", "1,1", "--n-schedule", "16,32")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "theorem_id,n,measured,predicted,ratio,dp_error_bound"
    assert len(lines) == 3


def test_verify_qbar(capsys, steps_file):
    code, out, _ = run_cli(capsys, "--steps", steps_file, "verify", "qbar")
    assert code == 0
    assert len(out.strip().splitlines()) == 6


def test_missing_steps_file_exit_3(capsys):
    code, _, err = run_cli(capsys, "--steps", "/nonexistent/steps.json",
                           "model", "moments")
    assert code == 3
    assert "error:" in err


def test_no_steps_exit_3(capsys):
    code, _, _ = run_cli(capsys, "model", "moments")
    assert code == 3


def test_validation_error_exit_3(capsys, steps_file):
    # untilted singular walk has nonzero vertical drift: pipeline refuses
    code, _, err = run_cli(capsys, "--steps", steps_file, "harmonic-w",
                           "--x", "1,1")
    assert code == 3
    assert "drift" in err


def test_usage_error_exit_2(capsys, steps_file):
    code, _, _ = run_cli(capsys, "--steps", steps_file, "dp", "bogus",
                         "--x", "1,1", "--n", "1")
    assert code == 2


def test_numeric_failure_exit_4_with_partial(capsys, tilted_file):
    code, out, err = run_cli(capsys, "--steps", tilted_file, "ladders",
                             "--dir", "down", "--no-exact-tail",
                             "--max-steps", "100")
    assert code == 4
    assert "numeric failure" in err
    obj = json.loads(out)
    assert "partial" in obj
