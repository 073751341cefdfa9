"""
JSON problem and sweep specification files (grammar in docs/problem_spec_format.md).

A problem spec either names a registered family ({"family": ..., "params": {...}}) or lists
a finite or Gaussian problem explicitly ({"backend": ..., "alternates": [...]}); either may
carry a "noise" record applied after construction.
"""
import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.measures.distributions import (NULL, DenseAlternate, ExplicitPrior, GaussianCovarianceAlternate,
                                        GaussianMeanShift, GaussianNull, ProductAlternate, ProductNull)
from src.measures.kernels import CovarianceKernel, TestingProblem
from src.utils.data_utils import generate_problem_id, load_json, save_json, spec_hash
from src.utils.errors import LdlrSdaError, SpecFormatError
from src.utils.logger import Logger

logger = Logger().get_logger()

BACKENDS = ("finite", "gaussian_mean", "gaussian_covariance")
QUANTITIES = ("ldlr", "sda", "product_sda", "k_lr", "high_degree")
# grid axes read by the evaluation rather than by the problem constructor
EVALUATION_AXES = ("m", "d", "k", "q", "mode", "budget")


def _require(record: Dict[str, Any], key: str, where: str):
    if key not in record:
        raise SpecFormatError(f"{where} is missing {key!r}")
    return record[key]


def _null_from_spec(record: Dict[str, Any]) -> ProductNull:
    values = _require(record, "values", "null")
    if "probs" in record:
        return ProductNull(values, record["probs"])
    marginal = _require(record, "marginal", "null")
    return ProductNull.repeated(values, marginal, int(_require(record, "n_coords", "null")))


def _finite_alternate(record: Dict[str, Any], null: ProductNull):
    if record.get("null"):
        return NULL
    label = record.get("label")
    if "table" in record:
        table = np.asarray(record["table"], dtype=float)
        return DenseAlternate(table.reshape(null.shape), label)
    if "product" in record:
        return ProductAlternate(record["product"], label)
    raise SpecFormatError(f"finite alternate needs 'table', 'product' or 'null': {sorted(record)}")


def _gaussian_alternate(backend: str, record: Dict[str, Any]):
    if record.get("null"):
        return NULL
    if backend == "gaussian_mean":
        return GaussianMeanShift(_require(record, "mean", "alternate"), record.get("label"))
    return GaussianCovarianceAlternate(_require(record, "perturbation", "alternate"), record.get("label"))


def _apply_noise(problem: TestingProblem, noise: Dict[str, Any], seed: int) -> TestingProblem:
    from src.noise.operators import MarkovOperator
    from src.noise.restrictions import RestrictionSpec, apply_noise

    null = problem.null
    if not isinstance(null, ProductNull) or not null.homogeneous:
        raise SpecFormatError("noise records need a homogeneous finite null")
    marginal = null.probs[0]
    if "matrix" in noise:
        operator = MarkovOperator(noise["matrix"], marginal, noise.get("name", "custom"))
    else:
        operator = MarkovOperator.noise_operator(float(noise.get("rho", 0.0)), marginal)
    if "restriction" in noise:
        r = noise["restriction"]
        spec = RestrictionSpec(mode=_require(r, "mode", "restriction"), rate=float(_require(r, "rate", "restriction")),
                               operator=operator, p=int(r.get("p", 1)), n=r.get("n"))
        return apply_noise(problem, spec, seed)
    return apply_noise(problem, operator, seed)


def problem_from_spec(spec: Dict[str, Any], seed: int = 0) -> TestingProblem:
    """Builds the problem a spec record describes; malformed records raise SpecFormatError."""
    if not isinstance(spec, dict):
        raise SpecFormatError(f"a problem spec is a JSON object, got {type(spec).__name__}")
    seed = int(spec.get("seed", seed))
    try:
        if "family" in spec:
            from src.zoo.registry import build_instance
            problem = build_instance(spec["family"], spec.get("params", {}), seed).problem
        else:
            backend = _require(spec, "backend", "problem spec")
            if backend not in BACKENDS:
                raise SpecFormatError(f"unknown backend {backend!r}; known: {', '.join(BACKENDS)}")
            records = _require(spec, "alternates", "problem spec")
            if not records:
                raise SpecFormatError("the prior lists no alternates")
            if backend == "finite":
                null = _null_from_spec(_require(spec, "null", "problem spec"))
                alternates = [_finite_alternate(r, null) for r in records]
            else:
                null = GaussianNull(int(_require(spec, "dim", "problem spec")))
                alternates = [_gaussian_alternate(backend, r) for r in records]
            problem_id = spec.get("problem_id") or generate_problem_id(backend, {"spec": spec_hash(spec)[:12]})
            kernel = CovarianceKernel() if backend == "gaussian_covariance" else None
            problem = TestingProblem(null, ExplicitPrior(alternates, spec.get("weights")), kernel,
                                     problem_id=problem_id, params={"family": backend})
        if "noise" in spec:
            problem = _apply_noise(problem, spec["noise"], seed)
    except SpecFormatError:
        raise
    except (LdlrSdaError, ValueError, TypeError) as e:
        raise SpecFormatError(f"invalid problem spec: {type(e).__name__}: {e}") from e
    if spec.get("problem_id") and "family" in spec:
        problem.problem_id = spec["problem_id"]
    return problem


def load_problem_spec(path: str, seed: int = 0) -> TestingProblem:
    try:
        spec = load_json(path)
    except (OSError, json.JSONDecodeError) as e:
        raise SpecFormatError(f"cannot read problem spec {path}: {e}") from e
    if spec is None:
        raise SpecFormatError(f"no problem spec at {path}")
    return problem_from_spec(spec, seed)


@dataclass
class SweepSpec:
    """A base problem record, a parameter grid and the quantities computed at every point."""
    problem: Dict[str, Any]
    grid: List[Tuple[str, List[Any]]]
    quantities: List[str]
    evaluation: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None

    def __post_init__(self):
        if not self.grid or any(not values for _, values in self.grid):
            raise SpecFormatError("sweep grid is empty")
        unknown = sorted(set(self.quantities) - set(QUANTITIES))
        if not self.quantities or unknown:
            raise SpecFormatError(f"bad quantities {unknown or self.quantities}; known: {', '.join(QUANTITIES)}")

    @property
    def axes(self) -> List[str]:
        return [name for name, _ in self.grid]

    def points(self) -> Iterator[Dict[str, Any]]:
        """Grid points in row-major order of the axes as listed."""
        for combo in itertools.product(*(values for _, values in self.grid)):
            yield dict(zip(self.axes, combo))

    def split(self, point: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
        """(problem spec, evaluation parameters) at a grid point."""
        evaluation = dict(self.evaluation)
        problem = json.loads(json.dumps(self.problem))
        for name, value in point.items():
            if name in EVALUATION_AXES:
                evaluation[name] = value
            elif "family" in problem:
                problem.setdefault("params", {})[name] = value
            else:
                problem[name] = value
        return problem, evaluation

    def to_dict(self) -> Dict[str, Any]:
        return {"problem": self.problem, "grid": {name: values for name, values in self.grid},
                "quantities": self.quantities, "evaluation": self.evaluation, "output": self.output}


def sweep_from_spec(spec: Dict[str, Any]) -> SweepSpec:
    if not isinstance(spec, dict):
        raise SpecFormatError("a sweep spec is a JSON object")
    grid = _require(spec, "grid", "sweep spec")
    if isinstance(grid, dict):
        grid = list(grid.items())
    elif isinstance(grid, list):
        grid = [(_require(axis, "axis", "grid"), _require(axis, "values", "grid")) for axis in grid]
    else:
        raise SpecFormatError("sweep grid must be an object or a list of {axis, values}")
    return SweepSpec(problem=_require(spec, "problem", "sweep spec"), grid=[(str(a), list(v)) for a, v in grid],
                     quantities=list(_require(spec, "quantities", "sweep spec")),
                     evaluation=dict(spec.get("evaluation", {})), output=spec.get("output"))


def load_sweep_spec(path: str) -> SweepSpec:
    try:
        spec = load_json(path)
    except (OSError, json.JSONDecodeError) as e:
        raise SpecFormatError(f"cannot read sweep spec {path}: {e}") from e
    if spec is None:
        raise SpecFormatError(f"no sweep spec at {path}")
    return sweep_from_spec(spec)


def save_sweep_spec(spec: SweepSpec, path: str) -> None:
    save_json(spec.to_dict(), path)
