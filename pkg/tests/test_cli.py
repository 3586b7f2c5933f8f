"""Command line behavior: exit codes, check listing, flag overrides."""

import json

import pytest

from plaplab.cli import main


def write_cfg(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj, indent=2))
    return str(path)


def elliptic(tmp_path, **over):
    base = {
        "kind": "elliptic",
        "grid": {"box": [[-1.0, 2.0]], "counts": [65]},
        "p": 2.0,
        "data": {"preset": "pressed_ramp"},
        "solver": {"omega": 1.9},
    }
    base.update(over)
    return write_cfg(tmp_path, base)


class TestExitCodes:
    def test_pass_is_zero(self, tmp_path, capsys):
        code = main(["solve", "--config", elliptic(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "[PASS] converged" in out
        assert "[PASS] kkt" in out
        assert "result: PASS" in out

    def test_failed_check_is_one(self, tmp_path, capsys):
        cfg = write_cfg(
            tmp_path,
            {
                "kind": "oracle",
                "oracle": {"name": "parabolic_halfspace", "p": 3.0, "constant": "quoted"},
            },
        )
        code = main(["oracle", "--config", cfg])
        assert code == 1
        out = capsys.readouterr().out
        assert "[FAIL] refinement_rate" in out
        assert "result: FAIL" in out

    def test_invalid_config_is_two(self, tmp_path, capsys):
        code = main(["solve", "--config", elliptic(tmp_path, p=0.5)])
        assert code == 2
        err = capsys.readouterr().err
        assert "invalid configuration" in err
        assert "p must exceed 1" in err

    def test_missing_file_is_two(self, tmp_path, capsys):
        code = main(["solve", "--config", str(tmp_path / "absent.json")])
        assert code == 2

    def test_malformed_json_is_two(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["solve", "--config", str(path)]) == 2

    def test_subcommand_kind_mismatch_is_two(self, tmp_path, capsys):
        code = main(["growth", "--config", elliptic(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert "subcommand 'growth' expects" in err

    def test_non_convergence_is_three(self, tmp_path, capsys):
        code = main(["solve", "--config", elliptic(tmp_path, solver={"max_sweeps": 2})])
        assert code == 3
        out = capsys.readouterr().out
        assert "[FAIL] converged" in out


class TestFlagOverrides:
    def test_out_override_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "artifacts"
        code = main(["solve", "--config", elliptic(tmp_path), "--out", str(out)])
        assert code == 0
        assert (out / "report.json").exists()
        assert (out / "solution.bin").exists()
        assert str(out) in capsys.readouterr().out

    def test_out_flag_does_not_change_digest(self, tmp_path, capsys):
        cfg = elliptic(tmp_path)
        main(["solve", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["solve", "--config", cfg, "--out", str(tmp_path / "b")])
        a = json.loads((tmp_path / "a" / "report.json").read_text())
        b = json.loads((tmp_path / "b" / "report.json").read_text())
        assert a["config_digest"] == b["config_digest"]

    def test_bad_thread_and_seed_values(self, tmp_path, capsys):
        assert main(["solve", "--config", elliptic(tmp_path), "--threads", "0"]) == 2
        assert main(["solve", "--config", elliptic(tmp_path), "--seed", "-1"]) == 2

    def test_audit_subcommand(self, tmp_path, capsys):
        cfg = write_cfg(
            tmp_path, {"kind": "audit", "oracle": {"name": "traveling_wave", "p": 3.0}}
        )
        assert main(["audit", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "[PASS] matches_analytic" in out

    def test_convergence_subcommand(self, tmp_path, capsys):
        cfg = write_cfg(
            tmp_path,
            {
                "kind": "convergence",
                "grid": {"box": [[0.0, 3.0]], "counts": [33]},
                "p": 2.0,
                "data": {"preset": "halfspace_ramp"},
                "solver": {"omega": 1.9},
            },
        )
        assert main(["convergence", "--config", cfg]) == 0
        assert "[PASS] rate" in capsys.readouterr().out
