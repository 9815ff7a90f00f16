import json
import subprocess

import pytest

jsonschema = pytest.importorskip("jsonschema")

# (config, command, extra args, expected exit code)
RUNS = [
    ("rotation_fixed_point.json", "reduce", [], 0),
    ("shear_eps05.json", "reduce", [], 0),
    ("shear_eps02.json", "reduce", ["--strict"], 0),
    ("schrodinger_elliptic.json", "exponents", [], 0),
    ("scaled_shear.json", "conformalize", ["--mode", "constant"], 0),
    ("conformal_golden.json", "conformalize", ["--mode", "function"], 0),
    ("dominated_block.json", "pipeline", ["--mode", "uniquely-ergodic"], 0),
    ("rotation_golden.json", "split", [], 0),
    ("rotation_forced.json", "split", [], 3),
    ("hyperbolic_diag.json", "sweep", [], 0),
    ("shear_sweep.json", "sweep", [], 0),
]


def schema(source_dir):
    return json.loads((source_dir / "schema" / "config.schema.json").read_text())


def test_schema_is_valid(source_dir):
    jsonschema.Draft202012Validator.check_schema(schema(source_dir))


def test_every_config_validates(source_dir, configs_dir):
    validator = jsonschema.Draft202012Validator(schema(source_dir))
    configs = sorted(configs_dir.glob("*.json"))
    assert configs
    for path in configs:
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        assert not errors, f"{path.name}: {errors[0].message}"


def test_schema_rejects_unknown_keys(source_dir):
    validator = jsonschema.Draft202012Validator(schema(source_dir))
    bad = {"base": {"kind": "periodic", "period": 1, "perod": 2}, "cocycle": {"kind": "constant", "matrix": [[1]]}}
    assert list(validator.iter_errors(bad))


@pytest.mark.parametrize("name,command,extra,expected", RUNS)
def test_cli_runs_and_is_reproducible(cli, configs_dir, tmp_path, name, command, extra, expected):
    outputs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        proc = subprocess.run(
            [cli, command, "--config", str(configs_dir / name), "--out", str(out), *extra],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == expected, proc.stderr
        outputs.append((out / "report.json").read_bytes())
        report = json.loads(outputs[-1])
        assert report["passed"] is (expected == 0)
        assert json.loads((out / "timings.json").read_text())
    assert outputs[0] == outputs[1]


def test_cli_stdout_and_usage_errors(cli, configs_dir, tmp_path):
    proc = subprocess.run([cli, "reduce", "--config", str(configs_dir / "shear_eps05.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "reduce"

    broken = tmp_path / "broken.json"
    broken.write_text('{"base": {}, "cocycle": {"kind": "constant", "matrix": [[1]]}}')
    proc = subprocess.run([cli, "exponents", "--config", str(broken)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "base.kind" in proc.stderr

    proc = subprocess.run(
        [cli, "sweep", "--config", str(configs_dir / "shear_sweep.json"), "--values", "0.5"], capture_output=True, text=True
    )
    assert proc.returncode == 2

    proc = subprocess.run([cli, "conformalize", "--config", str(configs_dir / "scaled_shear.json")], capture_output=True)
    assert proc.returncode == 2


def test_cli_sweep_csv(cli, configs_dir, tmp_path):
    out = tmp_path / "sweep"
    proc = subprocess.run(
        [cli, "sweep", "--config", str(configs_dir / "shear_sweep.json"), "--out", str(out)], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("value,perturbation_size,perturbation_bound,invariance_residual,orthogonality_defect")
    sizes = [float(line.split(",")[1]) for line in lines[1:]]
    assert all(b < a for a, b in zip(sizes, sizes[1:]))
