import json
import math
import os

import numpy as np
import pytest

from src.ldlr.norms import SamplewiseDegree, ldlr_norm
from src.measures.distributions import NULL, DenseAlternate, ProductAlternate
from src.measures.kernels import CovarianceKernel, GaussianMeanKernel
from src.measures.problem_io import (SweepSpec, load_problem_spec, load_sweep_spec, problem_from_spec,
                                     save_sweep_spec, sweep_from_spec)
from src.utils.errors import SpecFormatError
from src.zoo.sparse_parity import ParityAlternate

SPEC_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "specs")

FINITE_SPEC = {
    "backend": "finite",
    "problem_id": "coin-pair",
    "null": {"values": [-1, 1], "marginal": [0.5, 0.5], "n_coords": 2},
    "alternates": [
        {"product": [[0.3, 0.7], [0.5, 0.5]], "label": "a"},
        {"table": [0.1, 0.2, 0.3, 0.4]},
        {"null": True},
    ],
    "weights": [0.5, 0.25, 0.25],
}


class TestProblemSpecs:
    def test_finite(self):
        problem = problem_from_spec(FINITE_SPEC)
        alternates = problem.prior.alternates
        assert problem.problem_id == "coin-pair"
        assert isinstance(alternates[0], ProductAlternate)
        assert isinstance(alternates[1], DenseAlternate)
        assert alternates[2] is NULL
        np.testing.assert_allclose(problem.prior.weights, [0.5, 0.25, 0.25])

    def test_explicit_null_probs(self):
        spec = dict(FINITE_SPEC, null={"values": [0, 1], "probs": [[0.5, 0.5], [0.2, 0.8]]},
                    alternates=[{"product": [[0.5, 0.5], [0.3, 0.7]]}], weights=None)
        problem = problem_from_spec(spec)
        assert problem.null.shape == (2, 2)

    def test_generated_id_is_stable(self):
        spec = {k: v for k, v in FINITE_SPEC.items() if k != "problem_id"}
        assert problem_from_spec(spec).problem_id == problem_from_spec(json.loads(json.dumps(spec))).problem_id
        assert problem_from_spec(spec).problem_id.startswith("finite")

    def test_family(self):
        problem = problem_from_spec({"family": "sparse_parity", "problem_id": "parities",
                                     "params": {"n": 6, "s": 2, "family_size": 4}})
        assert problem.problem_id == "parities"
        assert all(isinstance(a, ParityAlternate) for a in problem.prior.alternates)

    def test_gaussian_mean(self):
        problem = problem_from_spec({"backend": "gaussian_mean", "dim": 2,
                                     "alternates": [{"mean": [0.5, 0.0]}, {"mean": [0.0, -0.5]}]})
        assert isinstance(problem.kernel, GaussianMeanKernel)
        # E exp(<mu, nu>) over independent draws: (2 e^0 + e^0.25 + e^0.25) / 4 - 1
        value = ldlr_norm(problem, 1, SamplewiseDegree(math.inf, 1)).value
        assert value == pytest.approx((2.0 + 2.0 * math.exp(0.25)) / 4.0 - 1.0)

    def test_gaussian_covariance(self):
        problem = problem_from_spec({"backend": "gaussian_covariance", "dim": 2,
                                     "alternates": [{"perturbation": [[0.1, 0.0], [0.0, -0.1]]}]})
        assert isinstance(problem.kernel, CovarianceKernel)

    def test_gaussian_needs_dimension(self):
        with pytest.raises(SpecFormatError):
            problem_from_spec({"backend": "gaussian_mean", "alternates": [{"mean": [0.5]}]})

    def test_noise(self):
        spec = {"family": "sparse_parity", "params": {"n": 6, "s": 2, "family_size": 4},
                "noise": {"rho": 0.5}}
        problem = problem_from_spec(spec)
        assert [a.strength for a in problem.prior.alternates] == pytest.approx([0.25] * 4)

    def test_restriction(self):
        spec = dict(FINITE_SPEC, alternates=FINITE_SPEC["alternates"][:1], weights=None,
                    noise={"rho": 0.4, "restriction": {"mode": "coordinate", "rate": 0.5}})
        problem = problem_from_spec(spec)
        assert len(problem.prior) == 4

    @pytest.mark.parametrize("spec", [
        [],
        {"backend": "quantum", "alternates": [{"null": True}]},
        {"backend": "finite", "null": {"values": [0, 1], "marginal": [0.5, 0.5], "n_coords": 1},
         "alternates": [{"mass": 1}]},
        {"backend": "finite", "null": {"values": [0, 1], "marginal": [0.5, 0.5], "n_coords": 1},
         "alternates": []},
        {"backend": "finite", "null": {"values": [0, 1], "marginal": [0.5, 0.5], "n_coords": 1},
         "alternates": [{"product": [[0.5, 0.6]]}]},
        {"backend": "finite", "null": {"values": [0, 1]}, "alternates": [{"null": True}]},
        {"family": "sparse_parity", "params": {"n": 6, "width": 2}},
        {"family": "sparse_parity", "params": {"n": 4, "s": 2, "family_size": 9}},
    ])
    def test_malformed(self, spec):
        with pytest.raises(SpecFormatError):
            problem_from_spec(spec)

    def test_load(self, tmp_path):
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(FINITE_SPEC))
        assert load_problem_spec(str(path)).problem_id == "coin-pair"

    def test_missing_and_broken_files(self, tmp_path):
        with pytest.raises(SpecFormatError):
            load_problem_spec(str(tmp_path / "absent.json"))
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(SpecFormatError):
            load_problem_spec(str(broken))


SWEEP = {
    "problem": {"family": "sparse_parity", "params": {"n": 6, "s": 2, "family_size": 4}},
    "grid": {"m": [2, 4], "rho": [1.0, 0.5]},
    "quantities": ["ldlr", "sda"],
    "evaluation": {"d": "inf", "k": 2},
}


class TestSweepSpecs:
    def test_points_in_row_major_order(self):
        sweep = sweep_from_spec(SWEEP)
        assert sweep.axes == ["m", "rho"]
        assert list(sweep.points()) == [{"m": 2, "rho": 1.0}, {"m": 2, "rho": 0.5},
                                        {"m": 4, "rho": 1.0}, {"m": 4, "rho": 0.5}]

    def test_list_grid(self):
        spec = dict(SWEEP, grid=[{"axis": "m", "values": [2, 4]}, {"axis": "rho", "values": [1.0]}])
        assert len(list(sweep_from_spec(spec).points())) == 2

    def test_split(self):
        sweep = sweep_from_spec(SWEEP)
        problem, evaluation = sweep.split({"m": 4, "rho": 0.5})
        assert evaluation == {"d": "inf", "k": 2, "m": 4}
        assert problem["params"]["rho"] == 0.5
        assert "rho" not in SWEEP["problem"]["params"]

    def test_split_without_family(self):
        sweep = SweepSpec(problem=dict(FINITE_SPEC), grid=[("weights", [[0.2, 0.3, 0.5]])], quantities=["ldlr"])
        problem, _ = sweep.split({"weights": [0.2, 0.3, 0.5]})
        assert problem["weights"] == [0.2, 0.3, 0.5]

    @pytest.mark.parametrize("change", [{"grid": {}}, {"grid": {"m": []}}, {"quantities": []},
                                        {"quantities": ["ldlr", "entropy"]}, {"grid": 3}])
    def test_malformed(self, change):
        with pytest.raises(SpecFormatError):
            sweep_from_spec(dict(SWEEP, **change))

    def test_save_then_load(self, tmp_path):
        path = str(tmp_path / "sweep.json")
        save_sweep_spec(sweep_from_spec(SWEEP), path)
        loaded = load_sweep_spec(path)
        assert loaded.to_dict() == sweep_from_spec(SWEEP).to_dict()

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpecFormatError):
            load_sweep_spec(str(tmp_path / "absent.json"))


@pytest.mark.parametrize("name", ["sparse_parity.json"])
def test_bundled_problem_specs(name):
    problem = load_problem_spec(os.path.join(SPEC_DIR, name))
    assert problem.problem_id == "parity-n8-s3-k4"


def test_bundled_sweep_spec():
    sweep = load_sweep_spec(os.path.join(SPEC_DIR, "tensor_pca_sweep.json"))
    assert sweep.axes == ["lambda", "m"]
    problem, evaluation = sweep.split(next(sweep.points()))
    assert problem_from_spec(problem).params["lambda"] == 0.25
    assert evaluation == {"d": 1, "k": 2, "m": 1}
