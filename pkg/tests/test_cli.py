import json

import pytest

from fairdyn.cli import main
from conftest import DEMO_DOC

COMPACT_DOC = (
    '{"m_c": 50, "m_nc": 100, "n": 20, "alpha": 0.5, "beta": 5, '
    '"distribution": {"family": "exponential"}}'
)


@pytest.fixture
def compact_file(tmp_path):
    path = tmp_path / "compact.json"
    path.write_text(COMPACT_DOC)
    return path


@pytest.fixture
def dp_file(tmp_path):
    path = tmp_path / "demo_dp.json"
    path.write_text(DEMO_DOC[:-1] + ', "policy": "dp"}')
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestThresholdCommand:
    def test_reference_cutoff(self, capsys, compact_file):
        code, out, _ = run(capsys, "threshold", compact_file, "--state", "2,3")
        assert code == 0
        values = dict(line.split("=") for line in out.strip().splitlines())
        assert abs(float(values["theta_c"]) - 5.385) < 5e-3
        assert float(values["residual"]) <= 1e-9 * 20
        # at least 12 significant digits survive the formatting
        assert len(values["theta_c"].replace(".", "").lstrip("0")) >= 12

    def test_solver_failure_exit_code(self, capsys, compact_file):
        code, _, err = run(capsys, "threshold", compact_file, "--state", "0,0")
        assert code == 4
        assert err.strip().count("\n") == 0  # one-line diagnostic


class TestStepAndSimulate:
    def test_step_values(self, capsys, compact_file):
        code, out, _ = run(capsys, "step", compact_file, "--state", "2,3")
        assert code == 0
        values = dict(line.split("=") for line in out.strip().splitlines())
        assert abs(float(values["mu_c"]) - 1.3385966321440942) < 1e-6
        assert abs(float(values["mu_nc"]) - 2.330701683927953) < 1e-6

    def test_simulate_reaches_protected_zero_attractor(self, capsys, demo_file, tmp_path):
        out_path = tmp_path / "traj.csv"
        code, _, _ = run(capsys, "simulate", demo_file, "--start", "1,2",
                         "--steps", "500", "--tol", "1e-9", "--out", out_path)
        assert code == 0
        lines = out_path.read_text().strip().splitlines()
        assert lines[0] == "t,mu_c,mu_nc,theta_c,theta_nc,P_c,P_nc,eta"
        last = lines[-1].split(",")
        assert abs(float(last[1]) - 0.0) < 1e-6
        assert abs(float(last[2]) - 2.5) < 1e-6

    def test_byte_identical_reruns(self, capsys, demo_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(capsys, "simulate", demo_file, "--start", "1.1,2.2", "--out", a)
        run(capsys, "simulate", demo_file, "--start", "1.1,2.2", "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestGridCommands:
    def test_phase_schema_and_default_frame(self, capsys, demo_file):
        code, out, _ = run(capsys, "phase", demo_file, "--resolution", "5")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "mu_c,mu_nc,u,v,flag"
        assert len(lines) == 1 + 25
        # default frame is 1.05 * max equilibrium coordinate = 5.25
        assert float(lines[-1].split(",")[0]) == pytest.approx(5.25)

    def test_basin_schema(self, capsys, demo_file):
        code, out, _ = run(capsys, "basin", demo_file, "--resolution", "5",
                           "--mu-max", "5", "--max-steps", "300", "--tol", "1e-6")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "mu_c,mu_nc,attractor,steps"
        assert len(lines) == 1 + 25
        labels = {line.split(",")[2] for line in lines[1:]}
        assert "undesirable_protected_zero" in labels
        assert "undesirable_nonprotected_zero" in labels

    def test_equilibria_rows(self, capsys, dp_file):
        code, out, _ = run(capsys, "equilibria", dp_file)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "label,mu_c,mu_nc,residual"
        assert len(lines) == 2
        label, mu_c, mu_nc, residual = lines[1].split(",")
        assert label == "dp_unique"
        assert float(mu_c) == pytest.approx(5 / 3, abs=1e-12)
        assert float(mu_nc) == pytest.approx(5 / 3, abs=1e-12)
        assert float(residual) < 1e-8


class TestStabilityCommand:
    def test_json_document(self, capsys, demo_file):
        code, out, _ = run(capsys, "stability", demo_file)
        assert code == 0
        reports = json.loads(out)
        by_label = {r["equilibrium"]["label"]: r for r in reports}
        assert by_label["desirable"]["verdict_fd"] == "unstable"
        assert by_label["desirable"]["criterion"]["holds"] is True
        assert by_label["undesirable_protected_zero"]["verdict_fd"] == "stable"
        eig = by_label["undesirable_protected_zero"]["eigenvalues_analytic"]
        assert eig[0]["re"] == pytest.approx(0.5) and eig[0]["im"] == 0.0


class TestMonteCarloCommand:
    def test_summary_and_trial_csv(self, capsys, compact_file, tmp_path):
        csv_path = tmp_path / "trials.csv"
        code, out, _ = run(capsys, "montecarlo", compact_file, "--state", "2,3",
                           "--trials", "200", "--seed", "5", "--trial-csv", csv_path)
        assert code == 0
        doc = json.loads(out)
        assert doc["trials"] == 200
        assert doc["accuracy_mean"] == 1.0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "trial,accepted_c,accepted_nc,accuracy,dp_gap"
        assert len(lines) == 201

    def test_deterministic_given_seed(self, capsys, compact_file):
        _, a, _ = run(capsys, "montecarlo", compact_file, "--state", "2,3",
                      "--trials", "100", "--seed", "7")
        _, b, _ = run(capsys, "montecarlo", compact_file, "--state", "2,3",
                      "--trials", "100", "--seed", "7")
        assert a == b


class TestExitCodes:
    def test_usage_errors(self, capsys, demo_file):
        assert run(capsys, "threshold", demo_file, "--frobnicate")[0] == 2
        assert run(capsys, "not-a-command", demo_file)[0] == 2
        assert run(capsys, "threshold", demo_file)[0] == 2  # missing --state

    def test_parse_errors(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert run(capsys, "equilibria", bad)[0] == 3
        invalid = tmp_path / "invalid.json"
        invalid.write_text(DEMO_DOC.replace('"alpha": 0.5', '"alpha": 2'))
        assert run(capsys, "equilibria", invalid)[0] == 3

    def test_solver_error(self, capsys, demo_file):
        assert run(capsys, "threshold", demo_file, "--state", "0,0")[0] == 4

    def test_io_errors(self, capsys, tmp_path, demo_file):
        assert run(capsys, "equilibria", tmp_path / "missing.json")[0] == 5
        assert run(capsys, "equilibria", demo_file,
                   "--out", tmp_path / "nodir" / "x.csv")[0] == 5

    def test_help_lists_all_subcommands(self, capsys):
        code, out, err = run(capsys, "--help")
        text = out + err
        for name in ("threshold", "step", "simulate", "phase", "basin",
                     "equilibria", "stability", "montecarlo"):
            assert name in text
        assert code == 0
