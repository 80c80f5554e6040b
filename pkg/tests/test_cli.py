"""Command-line interface: config resolution, outputs, exit codes."""

import json
import math

import numpy as np
import pytest

from wgcharge import cli

PI = "3.141592653589793"
TWO_PI = "6.283185307179586"


def read_csv_lines(path):
    text = path.read_text()
    meta = [l for l in text.splitlines() if l.startswith("#")]
    data = [l for l in text.splitlines() if l and not l.startswith("#")]
    return meta, data[0], data[1:]


class TestParsing:
    def test_version_exits_cleanly(self, capsys):
        assert cli.main(["--version"]) == 0
        assert "wgcharge" in capsys.readouterr().out

    def test_missing_setup_is_config_error(self, capsys):
        assert cli.main(["coeffs"]) == cli.EXIT_CONFIG
        assert "setup is required" in capsys.readouterr().err

    def test_unknown_setup_label(self, capsys):
        assert cli.main(["coeffs", "--setup", "5P"]) == cli.EXIT_CONFIG

    def test_invalid_config_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["coeffs", "--config", str(bad)]) == cli.EXIT_CONFIG
        assert "not valid JSON" in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"setup": "3P", "bogus": 1}))
        assert cli.main(["coeffs", "--config", str(cfg)]) == cli.EXIT_CONFIG
        assert "bogus" in capsys.readouterr().err

    def test_axis_spec_errors(self, capsys):
        rc = cli.main(["scan", "--setup", "3P", "--axis1", "theta2:0:1"])
        assert rc == cli.EXIT_CONFIG
        rc = cli.main(["scan", "--setup", "3P", "--axis1", "bogus:0:1:5"])
        assert rc == cli.EXIT_CONFIG
        capsys.readouterr()

    def test_flag_overrides_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"setup": "4P", "rates": {"gamma": 0.02}}))
        rc = cli.main(["coeffs", "--config", str(cfg), "--gamma", "0.01"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["rates"]["gamma"] == 0.01


class TestCoeffs:
    @pytest.mark.parametrize("label", ["4P", "4P+M", "3P", "3P+M"])
    def test_default_point_reports_agreement(self, capsys, label):
        assert cli.main(["coeffs", "--setup", label]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["setup"] == label
        assert payload["max_abs_diff"] < 1e-12
        assert payload["is_nonreciprocal"] is True
        g_bwd = complex(*payload["directional"]["g_bwd"])
        assert abs(g_bwd) < 1e-12

    def test_unequal_rates_skip_closed_form(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"setup": "4P", "rates": {"gamma11": 0.02}}))
        assert cli.main(["coeffs", "--config", str(cfg)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["closed_form"] is None
        assert payload["max_abs_diff"] is None
        assert payload["rates"]["equal"] is False

    def test_writes_json_file_when_output_dir_given(self, tmp_path, capsys):
        rc = cli.main(
            ["coeffs", "--setup", "3P", "--output-dir", str(tmp_path)]
        )
        assert rc == 0
        capsys.readouterr()
        assert (tmp_path / "coeffs.json").exists()


class TestDynamics:
    def test_writes_both_sides_and_summary(self, tmp_path):
        rc = cli.main(
            [
                "dynamics", "--setup", "4P",
                "--t-max", "2", "--n-points", "21",
                "--output-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        left = tmp_path / "dynamics_left.csv"
        right = tmp_path / "dynamics_right.csv"
        summary = tmp_path / "dynamics_summary.json"
        assert left.exists() and right.exists() and summary.exists()
        meta, header, rows = read_csv_lines(left)
        assert meta[0].startswith("# tool: wgcharge")
        assert any(l.startswith("# setup: 4P") for l in meta)
        assert any(l.startswith("# phases:") for l in meta)
        assert any(l.startswith("# rates:") for l in meta)
        assert any(l.startswith("# drive:") for l in meta)
        assert header.split(",")[:5] == [
            "t_scaled", "E_b_over_wb", "E_c_over_wc", "ergotropy_over_wb", "zeta"
        ]
        # linear drive gets closed-form companion columns
        assert "closed_form_residual" in header.split(",")
        assert len(rows) == 21
        payload = json.loads(summary.read_text())
        assert set(payload["sides"]) == {"left", "right"}
        assert payload["sides"]["left"]["steady"] is not None

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        args = ["dynamics", "--setup", "3P+M", "--t-max", "1", "--n-points", "11"]
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert cli.main(args + ["--output-dir", str(a)]) == 0
        assert cli.main(args + ["--output-dir", str(b)]) == 0
        assert (a / "dynamics_left.csv").read_bytes() == (
            b / "dynamics_left.csv"
        ).read_bytes()
        assert (a / "dynamics_summary.json").read_bytes() == (
            b / "dynamics_summary.json"
        ).read_bytes()

    def test_single_side_selection(self, tmp_path):
        rc = cli.main(
            [
                "dynamics", "--setup", "3P", "--drive-side", "right",
                "--t-max", "1", "--n-points", "5",
                "--output-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        assert (tmp_path / "dynamics_right.csv").exists()
        assert not (tmp_path / "dynamics_left.csv").exists()

    def test_unstable_quadratic_refused_before_writing(self, tmp_path, capsys):
        rc = cli.main(
            [
                "dynamics", "--setup", "4P+M",
                "--drive-kind", "quadratic", "--amplitude", "0.02",
                "--output-dir", str(tmp_path),
            ]
        )
        assert rc == cli.EXIT_PHYSICS
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "unstable quadratic drive"
        assert not list(tmp_path.glob("dynamics_*.csv"))

    def test_csv_only_format_from_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "setup": "3P",
                    "drive": {"kind": "linear", "amplitude": 0.001},
                    "time": {"t_max": 1.0, "n_points": 3},
                    "output": {
                        "directory": str(tmp_path / "out"),
                        "formats": ["csv"],
                    },
                }
            )
        )
        assert cli.main(["dynamics", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        assert (out / "dynamics_left.csv").exists()
        assert not (out / "dynamics_summary.json").exists()


class TestScan:
    def test_dead_cells_are_empty_csv_fields(self, tmp_path):
        rc = cli.main(
            [
                "scan", "--setup", "3P", "--phi2", PI,
                "--kappa1", "0", "--kappa2", "0",
                "--axis1", f"theta2:0:{TWO_PI}:8",
                "--axis2", f"phiw:0:{TWO_PI}:5",
                "--output-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        meta, header, rows = read_csv_lines(tmp_path / "scan_r.csv")
        assert header == "theta2,phiw,r"
        assert len(rows) == 40
        # theta2 = 0 with phi2 = pi leaves the battery without linewidth
        assert sum(1 for row in rows if row.endswith(",")) == 5
        summary = json.loads((tmp_path / "scan_r.json").read_text())
        assert summary["defined_cells"] == 35
        assert summary["total_cells"] == 40
        assert "unity_loci" in summary

    def test_metric_selection_limits_outputs(self, tmp_path):
        rc = cli.main(
            [
                "scan", "--setup", "3P", "--metric", "r",
                "--axis1", f"theta2:0:{TWO_PI}:4",
                "--axis2", f"phiw:0:{TWO_PI}:3",
                "--output-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        assert (tmp_path / "scan_r.csv").exists()
        assert not (tmp_path / "scan_eta.csv").exists()
        assert not (tmp_path / "scan_zeta.csv").exists()

    def test_quadratic_drive_grid(self, tmp_path):
        rc = cli.main(
            [
                "scan", "--setup", "4P+M",
                "--drive-kind", "quadratic", "--amplitude", "0.003",
                "--axis1", f"theta2:0:{TWO_PI}:5",
                "--axis2", f"phiw:0:{TWO_PI}:4",
                "--metric", "zeta",
                "--output-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        _, header, rows = read_csv_lines(tmp_path / "scan_zeta.csv")
        assert header == "theta2,phiw,zeta"
        assert len(rows) == 20
        values = [float(r.split(",")[2]) for r in rows if not r.endswith(",")]
        assert values and all(0.0 <= v <= 1.0 for v in values)

    def test_unequal_rates_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"setup": "3P", "rates": {"gamma21": 0.02}}))
        rc = cli.main(
            ["scan", "--config", str(cfg), "--output-dir", str(tmp_path)]
        )
        assert rc == cli.EXIT_CONFIG
        assert "equal per-point couplings" in capsys.readouterr().err


class TestStability:
    def test_reports_mode_poles_for_linear_drive(self, capsys):
        rc = cli.main(["stability", "--setup", "4P"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["stable"] is True
        # linear drive never alters the homogeneous drift: two mode poles
        assert len(payload["eigenvalues"]) == 2

    def test_quadratic_drive_reports_four_eigenvalues(self, capsys):
        rc = cli.main(
            ["stability", "--setup", "4P", "--drive-kind", "quadratic"]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["eigenvalues"]) == 4

    def test_threshold_search(self, capsys):
        rc = cli.main(
            [
                "stability", "--setup", "4P+M",
                "--drive-kind", "quadratic", "--find-threshold",
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["threshold"] == pytest.approx(0.0075, abs=1e-6)


class TestValidate:
    def test_strong_drive_guard(self, capsys):
        rc = cli.main(["validate", "--setup", "3P", "--amplitude", "0.01"])
        assert rc == cli.EXIT_PHYSICS
        assert "refused" in capsys.readouterr().err

    def test_weak_drive_comparison_passes(self, capsys):
        rc = cli.main(
            [
                "validate", "--setup", "3P",
                "--t-max", "0.5", "--n-points", "6",
                "--amplitude", "0.001",
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["pass"] is True
        assert payload["converged_cutoff"] == 12
        assert payload["max_deviation"] <= 1e-5
        assert set(payload["deviations"]) == {
            "m1", "m2", "n1", "n2", "x12", "s1", "s2", "s12"
        }


class TestScanGridsHelper:
    def test_quadratic_grid_matches_steady_solver(self):
        import wgcharge as w

        config = cli.RunConfig(
            setup=w.SetupKind.FOUR_POINT_MIRROR,
            phases=w.nonreciprocal_point(w.SetupKind.FOUR_POINT_MIRROR),
            rates=w.CouplingRates.equal_rates(0.01, 0.01, 0.01),
            drive=w.DriveSpec(w.DriveKind.QUADRATIC, w.DriveSide.LEFT, 0.003),
            time=cli.TimeGrid(),
            sweep=cli.SweepSpec(
                cli.SweepAxis("theta2", 0.0, 2.0 * math.pi, 4),
                cli.SweepAxis("phiw", 0.0, 2.0 * math.pi, 3),
            ),
            output=cli.OutputSpec(),
        )
        grids = cli._scan_grids(config)
        for i, theta2 in enumerate(grids["v1"]):
            for j, phiw in enumerate(grids["v2"]):
                phases = config.phases.replace(
                    theta2=float(theta2), phiw=float(phiw)
                )
                coeffs = w.network_coefficients(
                    config.setup, phases, config.rates
                )
                try:
                    e_left = w.steady_energies(
                        coeffs,
                        w.DriveSpec(w.DriveKind.QUADRATIC, w.DriveSide.LEFT, 0.003),
                    )
                    e_right = w.steady_energies(
                        coeffs,
                        w.DriveSpec(w.DriveKind.QUADRATIC, w.DriveSide.RIGHT, 0.003),
                    )
                except w.UnstableSystemError:
                    assert math.isnan(grids["eta"][i, j])
                    continue
                eta_ref = e_left["E_b"] / e_left["E_c"]
                assert grids["eta"][i, j] == pytest.approx(eta_ref, rel=1e-10)
                dc = w.directional_couplings(coeffs)
                if abs(dc.g_fwd) ** 2 + abs(dc.g_bwd) ** 2 < 1e-16:
                    # both couplings cancelled: contrast is undefined
                    assert math.isnan(grids["r"][i, j])
                    continue
                r_ref = (e_left["E_b"] - e_right["E_b"]) / (
                    e_left["E_b"] + e_right["E_b"]
                )
                assert grids["r"][i, j] == pytest.approx(r_ref, abs=1e-12)

    def test_linear_grid_matches_steady_solver(self):
        import wgcharge as w

        config = cli.RunConfig(
            setup=w.SetupKind.THREE_POINT_OPEN,
            phases=w.nonreciprocal_point(w.SetupKind.THREE_POINT_OPEN),
            rates=w.CouplingRates.equal_rates(0.01, 0.01, 0.01),
            drive=w.DriveSpec(w.DriveKind.LINEAR, w.DriveSide.LEFT, 0.15),
            time=cli.TimeGrid(),
            sweep=cli.SweepSpec(
                cli.SweepAxis("theta2", 0.0, 2.0 * math.pi, 4),
                cli.SweepAxis("phiw", 0.0, 2.0 * math.pi, 3),
            ),
            output=cli.OutputSpec(),
        )
        grids = cli._scan_grids(config)
        for i, theta2 in enumerate(grids["v1"]):
            for j, phiw in enumerate(grids["v2"]):
                phases = config.phases.replace(
                    theta2=float(theta2), phiw=float(phiw)
                )
                coeffs = w.network_coefficients(
                    config.setup, phases, config.rates
                )
                e_left = w.steady_energies(
                    coeffs, w.DriveSpec(w.DriveKind.LINEAR, w.DriveSide.LEFT, 0.15)
                )
                e_right = w.steady_energies(
                    coeffs, w.DriveSpec(w.DriveKind.LINEAR, w.DriveSide.RIGHT, 0.15)
                )
                eta_ref = e_left["E_b"] / e_left["E_c"]
                r_ref = (e_left["E_b"] - e_right["E_b"]) / (
                    e_left["E_b"] + e_right["E_b"]
                )
                assert grids["eta"][i, j] == pytest.approx(eta_ref, rel=1e-10)
                assert grids["r"][i, j] == pytest.approx(r_ref, abs=1e-12)
