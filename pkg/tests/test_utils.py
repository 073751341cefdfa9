import json
import math

import numpy as np
import pandas as pd
import pytest

from src.utils import numerics
from src.utils.data_utils import (DEFAULT_CONFIG, convert_numpy_types, generate_problem_id, load_config, load_json,
                                  save_json, save_records_to_csv, spec_hash)
from src.utils.errors import BinomialOverflowError, PreconditionError
from src.utils.logger import Logger
from src.utils.numerics import (binomial, central_binomial_series_head, central_binomial_series_tail, colex_subsets,
                                configure_limits, exp_head, exp_tail, root)
from src.utils.report_utils import CheckReport, margin_report, report_errors
from src.utils.seeding import derive_rng, derive_seed


class TestNumerics:
    def test_binomial(self):
        assert binomial(5, 2) == 10.0
        assert binomial(4, 5) == 0.0
        assert binomial(2.5, 1) == pytest.approx(2.5)
        assert binomial(1e9, 2) == pytest.approx(1e9 * (1e9 - 1) / 2, rel=1e-5)

    def test_binomial_overflow(self):
        with pytest.raises(BinomialOverflowError):
            binomial(1e9, 10 ** 6)

    def test_configure_limits(self):
        configure_limits({"state_cap": "64", "certify_tol": 1e-6, "exact_binomial_max_m": 0, "unknown": 3})
        assert numerics.LIMITS["state_cap"] == 64
        assert numerics.LIMITS["certify_tol"] == 1e-6
        assert "unknown" not in numerics.LIMITS
        # past the exact range binomials come from log-gamma
        assert binomial(5, 2) == pytest.approx(10.0, rel=1e-10)

    @pytest.mark.parametrize("c", [-2.0, 0.3, 3.0])
    def test_exp_head_and_tail_split_exp(self, c):
        for d in range(5):
            assert float(exp_head(c, d) + exp_tail(c, d)) == pytest.approx(math.exp(c), rel=1e-12)
        assert float(exp_head(c, math.inf)) == pytest.approx(math.exp(c))
        assert float(exp_tail(c, math.inf)) == 0.0

    def test_exp_head_small_degree(self):
        assert float(exp_head(0.5, 2)) == pytest.approx(1.0 + 0.5 + 0.125)

    def test_central_binomial_series(self):
        x = 0.1
        assert float(central_binomial_series_head(x, 3) + central_binomial_series_tail(x, 3)) == \
            pytest.approx(1.0 / math.sqrt(1.0 - 4.0 * x))
        assert float(central_binomial_series_head(x, 1)) == pytest.approx(1.0 + 2.0 * x)

    def test_colex_subsets(self):
        assert colex_subsets(4, 2).tolist() == [[0, 1], [0, 2], [1, 2], [0, 3], [1, 3], [2, 3]]

    def test_root(self):
        assert root(8.0, 3) == pytest.approx(2.0)
        assert root(-1e-16, 2) == 0.0
        with pytest.raises(ValueError):
            root(-1.0, 2)


class TestSeeding:
    def test_derive_seed(self):
        assert derive_seed(7, "sweep", 0) == derive_seed(7, "sweep", 0)
        assert derive_seed(7, "sweep", 0) != derive_seed(7, "sweep", 1)
        assert derive_seed(7, "sweep", 0) != derive_seed(8, "sweep", 0)

    def test_derive_rng(self):
        first = derive_rng(7, "bootstrap", 3).random(5)
        second = derive_rng(7, "bootstrap", 3).random(5)
        np.testing.assert_array_equal(first, second)


class TestReports:
    def test_check_report(self):
        report = CheckReport("identity", values={"gap": np.float64(1e-12), "m": np.int64(3)})
        assert report
        assert report["m"] == 3
        record = report.to_dict()
        assert isinstance(record["values"]["gap"], float)
        assert json.loads(str(report))["name"] == "identity"

    def test_margin_report(self):
        assert margin_report("ineq", 1.0, 1.0 - 1e-12)
        failed = margin_report("ineq", 2.0, 1.0, values={"m": 4})
        assert not failed
        assert failed.margin == -1.0
        assert failed["m"] == 4

    def test_report_errors(self):
        @report_errors("guarded")
        def verifier(fail):
            if fail:
                raise PreconditionError("m must be positive", subject="m")
            return CheckReport("guarded")

        assert verifier(False)
        failed = verifier(True)
        assert not failed
        assert failed.error == "PreconditionError: m must be positive"
        assert failed.elapsed is not None

    def test_report_errors_lets_bugs_through(self):
        @report_errors("guarded")
        def verifier():
            raise KeyError("bug")

        with pytest.raises(KeyError):
            verifier()


class TestDataUtils:
    def test_missing_config_gives_defaults(self, tmp_path):
        assert load_config(str(tmp_path / "absent.json")) == DEFAULT_CONFIG

    def test_partial_config_is_merged(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"numerics": {"state_cap": 64}, "seeds": {"default": 11}}))
        config = load_config(str(path))
        assert config["numerics"]["state_cap"] == 64
        assert config["numerics"]["sda_q_cap"] == DEFAULT_CONFIG["numerics"]["sda_q_cap"]
        assert config["seeds"]["default"] == 11
        assert DEFAULT_CONFIG["numerics"]["state_cap"] == 2 ** 22

    def test_json_files(self, tmp_path):
        path = str(tmp_path / "nested" / "out.json")
        save_json({"value": np.float64(0.5), "q": math.inf}, path)
        assert load_json(path) == {"value": 0.5, "q": "inf"}
        assert load_json(str(tmp_path / "absent.json")) is None

    def test_convert_numpy_types(self):
        assert convert_numpy_types({1: np.arange(2), "ok": np.bool_(True)}) == {"1": [0, 1], "ok": True}

    def test_spec_hash_ignores_key_order(self):
        assert spec_hash({"a": 1, "b": [1, 2]}) == spec_hash({"b": [1, 2], "a": 1})
        assert spec_hash({"a": 1}) != spec_hash({"a": 2})

    def test_generate_problem_id(self):
        assert generate_problem_id("tensor_pca", {"family": "tensor_pca", "n": 8, "lambda": 0.5}) == \
            "tensor_pca|lambda=0.5|n=8"

    def test_save_records_to_csv(self, tmp_path):
        path = str(tmp_path / "rows.csv")
        save_records_to_csv([{"value": 0.1, "check": "a", "note": "x"}, {"check": "b", "value": 0.2}], path,
                            columns=["check", "value", "status"])
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["check", "value", "status", "note"]
        assert frame["value"].tolist() == [0.1, 0.2]


def test_logger_is_shared():
    assert Logger() is Logger()
    assert Logger().get_logger().name == "ldlr_sda"
