import math

import pytest

from egf.cli import main
from egf.errors import ValidationError
from egf.runner import run_scenario, write_artifacts
from egf.scenarios import ScenarioParseError, parse_scenario

HEAT = """
kind: pde-reference
problem: circle-heat-decay
grid: 64
dt: 0.002
T: 1.0
init: cos
"""

EXACT = """
kind: pde-reference
problem: exact-quasilinear
grid: 128
dt: 0.002
T: 0.5
scheme: crank-nicolson
check-tolerance: 2e-4
"""


class TestParser:
    def test_common_fields(self):
        scn = parse_scenario(HEAT)
        assert scn.kind == "pde-reference"
        assert scn.grid == 64
        assert scn.dt == 0.002
        assert scn.length == pytest.approx(2 * math.pi)

    def test_comments_and_blank_lines(self):
        scn = parse_scenario("# header\nkind: tau-heat\n\ndt: 0.1 # inline\nT: 1\n")
        assert scn.kind == "tau-heat"
        assert scn.dt == 0.1

    def test_missing_colon_is_parse_error(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("kind tau-heat\n")

    def test_duplicate_key_is_parse_error(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("kind: tau-heat\nkind: reeb\ndt: 0.1\nT: 1\n")

    def test_bad_number_is_parse_error(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("kind: tau-heat\ndt: fast\nT: 1\n")

    def test_unknown_kind_is_validation_error(self):
        with pytest.raises(ValidationError):
            parse_scenario("kind: warp-drive\ndt: 0.1\nT: 1\n")

    def test_unknown_key_is_validation_error(self):
        with pytest.raises(ValidationError):
            parse_scenario("kind: tau-heat\ndt: 0.1\nT: 1\ncolor: red\n")

    def test_missing_required_key(self):
        with pytest.raises(ValidationError):
            parse_scenario("kind: tau-heat\nT: 1\n")

    def test_ftau_requires_spectrum(self):
        with pytest.raises(ValidationError):
            parse_scenario("kind: ftau\ndt: 0.1\nT: 1\nf: scaled-tau1\n")


class TestRunner:
    def test_heat_reference_checks_pass(self):
        res = run_scenario(parse_scenario(HEAT))
        assert res.passed
        assert res.exit_code == 0

    def test_exact_reference_error_column(self):
        res = run_scenario(parse_scenario(EXACT))
        assert res.passed
        assert res.metrics["sup_error"] <= 2e-4

    def test_umbilical_requires_zero_mean(self):
        scn = parse_scenario(
            "kind: umbilical\ngrid: 64\ndt: 0.01\nT: 0.1\ninit: cos\ninit-offset: 0.2\n"
        )
        with pytest.raises(ValidationError):
            run_scenario(scn)

    def test_umbilical_runs_and_volume_decreases(self):
        scn = parse_scenario(
            "kind: umbilical\ngrid: 128\ndt: 0.005\nT: 0.5\ninit: cos\n"
            "init-amplitude: 0.3\npsi-slope: 2\n"
        )
        res = run_scenario(scn)
        assert res.passed
        vols = [row[2] for row in res.summary_rows]
        assert vols[-1] < vols[0]

    def test_ftau_scenario(self):
        scn = parse_scenario(
            "kind: ftau\ngrid: 64\ndt: 0.005\nT: 0.1\nf: scaled-tau1\n"
            "spectrum: 0.4,1.0\ninit: cos\ninit-amplitude: 0.2\ninit-offset: 1.4\n"
        )
        res = run_scenario(scn)
        assert res.passed

    def test_twisted_scenario(self):
        scn = parse_scenario(
            "kind: twisted\ngrid: 64\ndt: 0.01\nT: 1.0\nn: 1\nbase-grid: 8\n"
            "fiber-grid: 64\nprofile: one-plus-x-squared\n"
        )
        res = run_scenario(scn)
        assert res.passed

    def test_byte_identical_artifacts(self, tmp_path):
        scn = parse_scenario(HEAT)
        res1 = run_scenario(scn)
        res2 = run_scenario(scn)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        write_artifacts(res1, str(d1))
        write_artifacts(res2, str(d2))
        for name in ("trajectory.csv", "summary.csv", "verdict.txt"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


class TestCli:
    def _write(self, tmp_path, text, name="scn.egf"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    def test_run_success_exit_zero(self, tmp_path, capsys):
        path = self._write(tmp_path, HEAT)
        code = main(["run", path, "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "trajectory.csv").exists()
        assert (tmp_path / "out" / "verdict.txt").exists()
        assert "overall: pass" in capsys.readouterr().out

    def test_malformed_file_exit_2_no_artifacts(self, tmp_path):
        path = self._write(tmp_path, "no separator here\n")
        out = tmp_path / "out"
        code = main(["run", path, "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_validation_error_exit_3(self, tmp_path):
        path = self._write(tmp_path, "kind: mystery\ndt: 0.1\nT: 1\n")
        assert main(["run", path, "--out", str(tmp_path / "out")]) == 3

    def test_nonzero_average_target_exit_3(self, tmp_path):
        text = (
            "kind: prescribed-F\ngrid: 64\ndt: 0.01\nT: 0.1\n"
            "init: zero\ntarget: cos\ntarget-offset: 0.1\n"
        )
        path = self._write(tmp_path, text)
        assert main(["run", path, "--out", str(tmp_path / "out")]) == 3

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.egf")]) == 2

    def test_reeb_verdict_contains_center_check(self, tmp_path):
        text = (
            "kind: reeb\ngrid: 256\ndt: 0.001\nT: 0.05\n"
            "scheme: crank-nicolson\nsave-every: 10\n"
        )
        path = self._write(tmp_path, text)
        out = tmp_path / "reeb"
        assert main(["run", path, "--out", str(out)]) == 0
        verdict = (out / "verdict.txt").read_text()
        assert "K_t(0)=0: pass" in verdict
        assert "det-identity: pass" in verdict

    def test_sweep_grid_monotone_error(self, tmp_path, capsys):
        path = self._write(tmp_path, EXACT)
        out = tmp_path / "sweep"
        code = main(
            ["sweep", path, "--param", "grid", "--values", "128,256,512", "--out", str(out)]
        )
        assert code == 0
        table = (out / "sweep.csv").read_text().strip().splitlines()
        errors = [float(line.split(",")[2]) for line in table[1:]]
        assert errors[0] > errors[1] > errors[2]
        for value in ("128", "256", "512"):
            assert (out / f"grid={value}" / "verdict.txt").exists()

    def test_sweep_empty_values_exit_3(self, tmp_path):
        path = self._write(tmp_path, HEAT)
        assert main(["sweep", path, "--param", "grid", "--values", ",", "--out", str(tmp_path / "o")]) == 3

    def test_sweep_threads(self, tmp_path):
        path = self._write(tmp_path, HEAT)
        out = tmp_path / "par"
        code = main(
            ["sweep", path, "--param", "T", "--values", "0.5,1.0", "--out", str(out),
             "--threads", "2"]
        )
        assert code == 0
        assert (out / "sweep.csv").exists()

    def test_sweep_alpha_stable_under_T(self, tmp_path):
        # fitted decay rate stays within 2% across time horizons
        path = self._write(
            tmp_path,
            "kind: tau-heat\ngrid: 128\ndt: 0.002\nT: 1.0\ninit: cos\n",
        )
        out = tmp_path / "sweepT"
        code = main(
            ["sweep", path, "--param", "T", "--values", "1,2,4", "--out", str(out)]
        )
        assert code == 0
        table = (out / "sweep.csv").read_text().strip().splitlines()
        alphas = [float(line.split(",")[3]) for line in table[1:]]
        assert max(alphas) / min(alphas) < 1.02


class TestSweepValidation:
    def test_unknown_param_rejected(self, tmp_path):
        path = tmp_path / "scn.egf"
        path.write_text(HEAT)
        code = main(
            ["sweep", str(path), "--param", "color", "--values", "1,2",
             "--out", str(tmp_path / "out")]
        )
        assert code == 3

    def test_sweep_deterministic_across_thread_counts(self, tmp_path):
        path = tmp_path / "scn.egf"
        path.write_text(HEAT)
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        assert main(["sweep", str(path), "--param", "T", "--values", "0.5,1.0",
                     "--out", str(out1)]) == 0
        assert main(["sweep", str(path), "--param", "T", "--values", "0.5,1.0",
                     "--out", str(out2), "--threads", "2"]) == 0
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
        for sub in ("T=0.5", "T=1.0"):
            a = (out1 / sub / "trajectory.csv").read_bytes()
            b = (out2 / sub / "trajectory.csv").read_bytes()
            assert a == b
