"""Config parsing, report emission, determinism, and exit codes."""

import json

import numpy as np

from elliptic_inclusions.cli import emit_report, main, run_config


def write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return path


def poisson_config(**extra):
    cfg = {
        "schema_version": 1,
        "kind": "homogeneous",
        "operator": {"family": "grad1d", "shape": [3], "h": 1.0, "boundary": "zero"},
        "relation": {"type": "linear", "matrix": np.eye(4).tolist()},
        "f": [1, 1, 1],
        "checks": [],
    }
    cfg.update(extra)
    return cfg


def test_run_config_poisson(tmp_path):
    path = write_config(tmp_path, poisson_config(checks=["certificate", "oracle"]))
    report = run_config(path)
    assert report.exit_code == 0
    assert np.allclose(report.data["solution"]["u"], [1.5, 2.0, 1.5])
    by_name = {c["name"]: c for c in report.data["checks"]}
    assert by_name["certificate"]["pass"]
    assert by_name["oracle"]["pass"]
    assert by_name["oracle"]["oracle_delta"] <= 1e-8


def test_cli_rejects_neumann_kernel_rhs(tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "neumann",
        "operator": {"family": "grad1d", "shape": [5], "h": 1.0},
        "relation": {"type": "linear", "matrix": np.eye(4).tolist()},
        "f": [1, 1, 1, 1, 1],
        "checks": [],
    }
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code != 0
    assert report.data["error"]["code"] == "rhs_not_in_H_minus_1"
    assert report.data["pass"] is False


def test_cli_oracle_check_on_sign_relation(tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "homogeneous",
        "operator": {"family": "grad1d", "shape": [2], "h": 1.0, "boundary": "zero"},
        "relation": {"type": "diagonal", "c": 1.0, "graphs": {"kind": "sign"}},
        "f": [1.2, -0.3],
        "checks": ["oracle"],
    }
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 0
    oracle = report.data["checks"][0]
    assert oracle["name"] == "oracle"
    assert oracle["oracle_delta"] <= 1e-8


def test_emit_json_round_trips(tmp_path):
    path = write_config(tmp_path, poisson_config())
    report = run_config(path)
    payload = emit_report(report, "json")
    assert json.loads(payload) == report.data


def test_empty_checks_serialize_as_arrays(tmp_path):
    path = write_config(tmp_path, poisson_config(checks=[]))
    report = run_config(path)
    assert report.data["checks"] == []
    assert isinstance(report.data["config"]["checks"], list)
    assert b'"checks": []' in emit_report(report, "json")


def test_reports_are_deterministic(tmp_path):
    path = write_config(tmp_path, poisson_config(
        checks=["certificate", "lipschitz", "monotonicity"], seed=5))
    payloads = []
    for _ in range(3):
        report = run_config(path)
        data = json.loads(emit_report(report, "json"))
        del data["timing"]
        payloads.append(json.dumps(data, sort_keys=True).encode())
    assert payloads[0] == payloads[1] == payloads[2]


def test_schema_error_reports_field(tmp_path):
    cfg = poisson_config()
    cfg["kind"] = "parabolic"
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 2
    assert report.data["error"]["code"] == "config_error"
    assert "kind" in report.data["error"]["message"]

    cfg = poisson_config(checks=["nosuch"])
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 2
    assert "checks[0]" in report.data["error"]["message"]


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema_version": 1,\n  "kind": ???\n}\n')
    report = run_config(path)
    assert report.exit_code == 2
    assert "line 3" in report.data["error"]["message"]


def test_vector_file_reference(tmp_path):
    fpath = tmp_path / "f.txt"
    fpath.write_text("1\n1\n1\n")
    cfg = poisson_config(f={"path": "f.txt"})
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 0
    assert np.allclose(report.data["solution"]["u"], [1.5, 2.0, 1.5])


def test_missing_vector_file_is_config_error(tmp_path):
    cfg = poisson_config(f={"path": "absent.txt"})
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 2


def test_main_solve_and_flags(tmp_path, capsys):
    path = write_config(tmp_path, poisson_config(checks=["certificate"]))
    out = tmp_path / "report.json"
    code = main(["solve", "--config", str(path), "--report", str(out),
                 "--tol", "1e-9", "--seed", "3"])
    assert code == 0
    data = json.loads(out.read_bytes())
    assert data["config"]["tol"] == 1e-9
    assert data["config"]["seed"] == 3

    code = main(["solve", "--config", str(path), "--format", "text"])
    captured = capsys.readouterr()
    assert code == 0
    assert "status: ok" in captured.out


def test_main_verify_dirichlet(tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "dirichlet",
        "operator": {"family": "grad1d", "shape": [5], "h": 1.0},
        "relation": {"type": "linear", "matrix": (2.0 * np.eye(4)).tolist()},
        "f": [0.5, -0.2, 0.1],
        "u0": [0, 1, 2, 3, 4],
        "checks": [],
    }
    path = write_config(tmp_path, cfg)
    code = main(["verify", "--config", str(path), "--report",
                 str(tmp_path / "verify.json")])
    assert code == 0
    data = json.loads((tmp_path / "verify.json").read_bytes())
    names = {c["name"] for c in data["checks"]}
    assert "dirichlet_estimate" in names
    assert all(c["pass"] for c in data["checks"])


def test_main_oracle_check_subcommand(tmp_path, capsys):
    path = write_config(tmp_path, poisson_config())
    code = main(["oracle-check", "--config", str(path)])
    captured = capsys.readouterr()
    assert code == 0
    data = json.loads(captured.out)
    assert data["checks"][0]["name"] == "oracle"


def test_main_exit_code_for_config_error(tmp_path):
    path = tmp_path / "missing.json"
    code = main(["solve", "--config", str(path), "--report",
                 str(tmp_path / "r.json")])
    assert code == 2


def test_neumann_estimate_check_via_cli(tmp_path):
    f = np.array([1.0, -0.5, 0.25, -0.5, -0.25])
    cfg = {
        "schema_version": 1,
        "kind": "neumann",
        "operator": {"family": "grad1d", "shape": [5], "h": 1.0},
        "relation": {"type": "diagonal", "c": 1.5, "graphs": {"kind": "sign"}},
        "f": f.tolist(),
        "checks": ["neumann_estimate", "certificate"],
        "seed": 11,
    }
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 0
    by_name = {c["name"]: c for c in report.data["checks"]}
    assert by_name["neumann_estimate"]["pass"]


def test_homogeneous_kernel_rhs_reports_error_code(tmp_path):
    cfg = {
        "schema_version": 1,
        "kind": "homogeneous",
        "operator": {"family": "grad1d", "shape": [4], "h": 1.0, "boundary": "free"},
        "relation": {"type": "linear", "matrix": np.eye(3).tolist()},
        "f": [1, 1, 1, 1],
        "checks": [],
    }
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 1
    assert report.data["error"]["code"] == "rhs_not_in_H_minus_1"


def test_custom_operator_from_matrix_market(tmp_path):
    import scipy.io
    import scipy.sparse

    m = np.array([[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]])
    scipy.io.mmwrite(tmp_path / "op.mtx", scipy.sparse.coo_array(m))
    cfg = {
        "schema_version": 1,
        "kind": "homogeneous",
        "operator": {"family": "custom", "path": "op.mtx"},
        "relation": {"type": "linear", "matrix": np.eye(3).tolist()},
        "f": [0.5, -0.5],
        "checks": ["certificate", "oracle"],
    }
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 0
    u = np.asarray(report.data["solution"]["u"])
    assert np.allclose(m.T @ m @ u, [0.5, -0.5], atol=1e-9)


def test_relation_matrix_from_file(tmp_path):
    import scipy.io
    import scipy.sparse

    scipy.io.mmwrite(tmp_path / "rel.mtx", scipy.sparse.coo_array(2.0 * np.eye(4)))
    cfg = poisson_config(relation={"type": "linear", "path": "rel.mtx"})
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 0
    assert np.allclose(report.data["solution"]["u"], [0.75, 1.0, 0.75])


def test_dirichlet_oracle_checks(tmp_path):
    base = {
        "schema_version": 1,
        "kind": "dirichlet",
        "operator": {"family": "grad1d", "shape": [5], "h": 1.0},
        "f": [0.4, -0.1, 0.3],
        "u0": [0, 1, 2, 3, 4],
        "checks": ["oracle", "certificate"],
    }
    linear = dict(base, relation={"type": "linear",
                                  "matrix": (1.5 * np.eye(4)).tolist()})
    report = run_config(write_config(tmp_path, linear, name="lin.json"))
    assert report.exit_code == 0
    assert {c["name"]: c["pass"] for c in report.data["checks"]}["oracle"]

    diagonal = dict(base, relation={"type": "diagonal", "c": 1.0,
                                    "graphs": {"kind": "sign"}})
    report = run_config(write_config(tmp_path, diagonal, name="diag.json"))
    assert report.exit_code == 0
    assert {c["name"]: c["pass"] for c in report.data["checks"]}["oracle"]


def test_missing_relation_file_is_config_error(tmp_path):
    cfg = poisson_config(relation={"type": "linear", "path": "absent.mtx"})
    report = run_config(write_config(tmp_path, cfg))
    assert report.exit_code == 2
    assert report.data["error"]["code"] == "config_error"
