import json
import math
import os

import pandas as pd
import pytest

from main_driver import REPORT_COLUMNS, VerificationPipeline, _parse_degree, _with_niceness, evaluate_sweep_point
from run_project import EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_PASS, EXIT_USAGE, main
from src.measures.problem_io import sweep_from_spec
from src.noise.restrictions import NicenessCertificate
from src.utils.data_utils import DEFAULT_CONFIG
from src.utils.errors import UnknownSuiteError
from src.utils.report_utils import CheckReport

PARITY_PROBLEM = {"family": "sparse_parity", "params": {"n": 6, "s": 2, "family_size": 4}}

SWEEP = {
    "problem": PARITY_PROBLEM,
    "grid": {"m": [2, 4], "rho": [1.0, 0.5]},
    "quantities": ["ldlr", "sda"],
    "evaluation": {"d": "inf", "k": 2},
}

# one dense alternate over {0, 1}^2: four states, above a state cap of 2
DENSE_SPEC = {
    "backend": "finite",
    "problem_id": "dense-2",
    "null": {"values": [0, 1], "marginal": [0.5, 0.5], "n_coords": 2},
    "alternates": [{"table": [0.1, 0.2, 0.3, 0.4]}],
}


def _write(tmp_path, name, record):
    path = tmp_path / name
    path.write_text(json.dumps(record))
    return str(path)


class TestCommandLine:
    def test_no_command(self):
        assert main([]) == EXIT_USAGE

    def test_unknown_suite(self, small_config):
        assert main(["verify", "bogus", "--config", small_config]) == EXIT_USAGE

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["sweep"])
        assert info.value.code == 2

    def test_verify(self, small_config, tmp_path):
        out = str(tmp_path / "identities.csv")
        assert main(["verify", "identities", "--config", small_config, "--out", out, "--quiet"]) == EXIT_PASS
        frame = pd.read_csv(out)
        assert list(frame.columns[:len(REPORT_COLUMNS)]) == REPORT_COLUMNS
        assert len(frame) == 5 + 3
        assert frame["passed"].all()
        with open(str(tmp_path / "identities.manifest.json")) as f:
            manifest = json.load(f)
        assert manifest["command"] == "verify identities"
        assert manifest["seed"] == 7
        assert manifest["tasks"][0]["status"] == "pass"
        assert os.path.exists(str(tmp_path / "identities.report.json"))

    def test_sweep(self, small_config, tmp_path):
        spec = _write(tmp_path, "sweep.json", SWEEP)
        out = str(tmp_path / "sweep.csv")
        assert main(["sweep", "--spec", spec, "--config", small_config, "--out", out, "--quiet"]) == EXIT_PASS
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["problem_id", "m", "rho", "quantity", "value", "stderr", "seed", "status"]
        assert len(frame) == 8
        assert list(frame["quantity"]) == ["ldlr", "sda"] * 4
        assert list(frame["m"]) == [2, 2, 2, 2, 4, 4, 4, 4]
        ldlr = frame[(frame["quantity"] == "ldlr") & (frame["m"] == 2) & (frame["rho"] == 1.0)]
        # four distinct parities at full strength: (C(2,1) + C(2,2)) / 4
        assert float(ldlr["value"].iloc[0]) == pytest.approx(0.75)

    def test_parallel_sweep_matches_serial(self, small_config, tmp_path):
        spec = _write(tmp_path, "sweep.json", SWEEP)
        serial, parallel = str(tmp_path / "serial.csv"), str(tmp_path / "parallel.csv")
        assert main(["sweep", "--spec", spec, "--config", small_config, "--out", serial, "--quiet"]) == EXIT_PASS
        assert main(["sweep", "--spec", spec, "--config", small_config, "--out", parallel, "--quiet",
                     "--jobs", "2"]) == EXIT_PASS
        pd.testing.assert_frame_equal(pd.read_csv(serial), pd.read_csv(parallel))

    def test_infeasible_sweep(self, small_config, tmp_path):
        spec = _write(tmp_path, "dense.json", {"problem": DENSE_SPEC, "grid": {"m": [2]},
                                               "quantities": ["ldlr"], "evaluation": {"d": 1, "k": 1}})
        out = str(tmp_path / "dense.csv")
        code = main(["sweep", "--spec", spec, "--config", small_config, "--out", out, "--cap-states", "2",
                     "--quiet"])
        assert code == EXIT_INFEASIBLE
        assert pd.read_csv(out)["status"].iloc[0].startswith("infeasible")

    def test_bad_sweep_spec(self, small_config, tmp_path):
        spec = _write(tmp_path, "sweep.json", dict(SWEEP, quantities=["entropy"]))
        assert main(["sweep", "--spec", spec, "--config", small_config, "--quiet"]) == EXIT_USAGE

    def test_clone_test(self, small_config, tmp_path):
        out = str(tmp_path / "clones.csv")
        assert main(["clone-test", "--m", "2", "--trials", "2000", "--config", small_config, "--out", out,
                     "--quiet"]) == EXIT_PASS
        frame = pd.read_csv(out)
        assert set(frame["check"]) == {"clone_round_trip", "householder", "bernoulli_gof", "gaussian_moments"}

    def test_sq_sim(self, small_config, tmp_path):
        problem = _write(tmp_path, "parity.json", PARITY_PROBLEM)
        out = str(tmp_path / "sq.csv")
        assert main(["sq-sim", "--problem", problem, "--oracle-m", "100", "--trials", "10", "--config",
                     small_config, "--out", out, "--dump-transcripts", "--quiet"]) == EXIT_PASS
        assert pd.read_csv(out)["success_rate"].iloc[0] == 1.0
        transcripts = pd.read_csv(str(tmp_path / "sq.transcripts.csv"))
        assert len(transcripts) == 10 * 2 * 4

    def test_sq_sim_bad_policy(self, small_config, tmp_path):
        problem = _write(tmp_path, "parity.json", PARITY_PROBLEM)
        assert main(["sq-sim", "--problem", problem, "--oracle-m", "100", "--policy", "{bad",
                     "--config", small_config, "--quiet"]) == EXIT_USAGE

    def test_sq_sim_missing_problem(self, small_config, tmp_path):
        assert main(["sq-sim", "--problem", str(tmp_path / "absent.json"), "--oracle-m", "100",
                     "--config", small_config, "--quiet"]) == EXIT_USAGE

    def test_sq_sim_parity_scan_needs_parities(self, small_config, tmp_path):
        problem = _write(tmp_path, "dense.json", DENSE_SPEC)
        assert main(["sq-sim", "--problem", problem, "--oracle-m", "100", "--config", small_config,
                     "--quiet"]) == EXIT_FAILURE


class TestPipeline:
    def test_unknown_suite(self, small_config):
        with pytest.raises(UnknownSuiteError):
            VerificationPipeline(small_config, quiet=True).run_suite("bogus")

    def test_state_cap_override(self, small_config):
        from src.measures import distributions
        VerificationPipeline(small_config, cap_states=64, quiet=True)
        assert distributions.LIMITS["state_cap"] == 64

    def test_defaults_come_from_config(self, small_config, tmp_path):
        pipeline = VerificationPipeline(small_config, quiet=True)
        assert pipeline.seed == 7
        assert pipeline.out_dir == str(tmp_path / "results")

    def test_sweep_point_error_rows(self):
        task = (0, {"m": 2}, {"family": "planted_forest"}, {"m": 2}, ["ldlr", "sda"], 11,
                DEFAULT_CONFIG["numerics"])
        rows = evaluate_sweep_point(task)
        assert len(rows) == 2
        assert all(row["status"].startswith("error: SpecFormatError") for row in rows)

    def test_sweep_point_needs_m(self):
        task = (0, {"rho": 1.0}, PARITY_PROBLEM, {}, ["sda", "k_lr"], 11, DEFAULT_CONFIG["numerics"])
        sda_row, k_lr_row = evaluate_sweep_point(task)
        assert sda_row["status"].startswith("error")
        assert k_lr_row["status"] == "ok"

    def test_sweep_seeds_follow_the_grid(self, small_config, tmp_path):
        pipeline = VerificationPipeline(small_config, quiet=True)
        out = str(tmp_path / "sweep.csv")
        pipeline.sweep(sweep_from_spec(SWEEP), out)
        seeds = pd.read_csv(out)["seed"].tolist()
        assert seeds[0] == seeds[1] and seeds[0] != seeds[2]

    @pytest.mark.parametrize("value,expected", [("inf", math.inf), (None, math.inf), (2, 2), ("3", 3)])
    def test_parse_degree(self, value, expected):
        assert _parse_degree(value) == expected

    def test_niceness_is_recorded_not_checked(self):
        report = CheckReport("restricted_sda", passed=True)
        report = _with_niceness(report, NicenessCertificate(delta=1.0, k=2, m=4, threshold=4 ** -1 / 4))
        assert report.passed
        assert report["nice"] is False
        assert report["niceness_delta"] == 1.0
