import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.cloning.cloners import (CloneConfig, bernoulli_gof_check, clone_round_trip_check, gaussian_moment_check,
                                 householder_check)
from src.ldlr.checks import (boosting_bound_check, gaussian_high_degree_bound, holder_split_check, identity_check,
                             monotonicity_check, product_high_degree_bound, symmetric_claims_check)
from src.ldlr.corpus import finite_corpus, random_discrete_variable, random_product_instance
from src.ldlr.norms import SamplewiseDegree, high_degree_norm, k_sample_lr_norm, ldlr_norm
from src.measures.correlation import EXACT, correlation_atoms
from src.measures.distributions import configure_limits
from src.measures.problem_io import SweepSpec, load_problem_spec, problem_from_spec
from src.noise.operators import MarkovOperator, attenuation_check, certify_d_eps
from src.noise.restrictions import (COORDINATE, SUBTENSOR, NicenessCertificate, RestrictionSpec,
                                    niceness_certificate, verify_restriction_bounds)
from src.sda.dimension import conditional_moment_bound, product_sda, sda
from src.sda.verifiers import (fact_moment_tail_check, verify_noisy_sda, verify_restricted_sda,
                               verify_sda_to_ldlr)
from src.sq.algorithms import (make_policy, nonadaptive_consistency_check, parity_scan_tightness,
                               run_sq_algorithm)
from src.sq.distinguisher import projection_distinguisher_check
from src.sq.oracle import ParityQuery
from src.sq.polynomial import build_f_psi, truncation_check
from src.utils.data_utils import load_config, save_json, save_records_to_csv, spec_hash
from src.utils.errors import (InfeasibleSizeError, LdlrSdaError, PriorModeError, StateCapExceededError,
                              UnknownSuiteError, UnsupportedBackendError)
from src.utils.logger import DEFAULT_CONFIG_PATH, Logger
from src.utils.numerics import is_unbounded
from src.utils.report_utils import CheckReport, margin_report, report_errors
from src.utils.seeding import derive_seed
from src.zoo import claims
from src.zoo.planted_clique import make_multisample_hpc
from src.zoo.sparse_parity import make_sparse_parity
from src.zoo.tensor_pca import make_tensor_pca

VERSION = "1.0.0"
SUITES = ("identities", "inequalities", "noise", "cloning", "sq", "zoo")
SWEEP_TAIL_COLUMNS = ["quantity", "value", "stderr", "seed", "status"]
REPORT_COLUMNS = ["suite", "check", "problem_id", "passed", "margin", "error", "elapsed"]
# errors that mark a sweep point as out of reach of the exact backends
INFEASIBLE_ERRORS = (StateCapExceededError, InfeasibleSizeError, UnsupportedBackendError, PriorModeError)
SUCCESS_STATUSES = ("ok", "unbounded", "capped")


@dataclass
class RunManifest:
    """Everything needed to reproduce a CSV: inputs, version and per-task status."""
    command: str
    seed: int
    spec_hash: str
    version: str = VERSION
    started: str = field(default_factory=lambda: datetime.now().isoformat())
    wall_clock: float = 0.0
    tasks: List[Dict[str, Any]] = field(default_factory=list)
    outputs: Dict[str, str] = field(default_factory=dict)

    def add_task(self, task: str, status: str, **extra) -> None:
        self.tasks.append({"task": task, "status": status, **extra})

    def save(self, path: str) -> None:
        save_json(asdict(self), path)


@dataclass
class SuiteResult:
    suite: str
    reports: List[CheckReport]

    @property
    def passed(self) -> bool:
        return all(bool(r) for r in self.reports)

    @property
    def failures(self) -> List[CheckReport]:
        return [r for r in self.reports if not r]

    def to_records(self) -> List[Dict[str, Any]]:
        return [{"suite": self.suite, "check": r.name, "problem_id": r.values.get("problem_id", ""),
                 "passed": bool(r.passed), "margin": "" if r.margin is None else r.margin,
                 "error": r.error or "", "elapsed": r.elapsed} for r in self.reports]


def _manifest_path(csv_path: str) -> str:
    return os.path.splitext(csv_path)[0] + ".manifest.json"


def _with_problem_id(report: CheckReport, problem_id: str) -> CheckReport:
    report.values.setdefault("problem_id", problem_id)
    return report


def _with_niceness(report: CheckReport, certificate: NicenessCertificate) -> CheckReport:
    """Niceness is a hypothesis of the restricted bound, recorded next to it rather than checked."""
    report.values.update({"nice": certificate.valid, "niceness_delta": certificate.delta,
                          "niceness_threshold": certificate.threshold})
    return report


def _parse_degree(value):
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
        return math.inf
    return value if is_unbounded(value) else int(value)


def _status_of_report(report) -> str:
    if getattr(report, "unbounded", False):
        return "unbounded"
    if getattr(report, "capped", False):
        return "capped"
    return "ok"


def _compute_quantity(problem, quantity: str, evaluation: Dict[str, Any], seed: int):
    """(value, stderr, status) of one quantity at one grid point."""
    mode = evaluation.get("mode", EXACT)
    budget = evaluation.get("budget")
    m = float(evaluation["m"]) if "m" in evaluation else None
    d = _parse_degree(evaluation.get("d"))
    k = int(evaluation.get("k", m if m is not None else 2))
    if quantity in ("ldlr", "sda", "product_sda") and m is None:
        raise LdlrSdaError(f"{quantity} needs the oracle/sample parameter m")
    if quantity == "ldlr":
        report = ldlr_norm(problem, m, SamplewiseDegree(d, k), mode, budget, seed)
        return report.value, report.stderr, "ok"
    if quantity == "sda":
        report = sda(problem, m, mode, budget, seed)
        return report.q, None, _status_of_report(report)
    if quantity == "product_sda":
        report = product_sda(problem, m)
        return report.q, None, _status_of_report(report)
    if quantity == "k_lr":
        report = k_sample_lr_norm(problem, k, mode, budget, seed)
        return report.uncentered, report.stderr, "ok"
    return high_degree_norm(problem, d, k, mode, budget, seed), None, "ok"


def evaluate_sweep_point(task) -> List[Dict[str, Any]]:
    """
    One grid point in a worker process: builds the problem and computes every quantity; a
    library error or a non-finite value becomes a status row instead of an exception.
    """
    index, point, problem_spec, evaluation, quantities, seed, numerics = task
    configure_limits(numerics)
    base = dict(point)
    try:
        problem = problem_from_spec(problem_spec, seed)
        base = {"problem_id": problem.problem_id, **point}
    except LdlrSdaError as e:
        return [{"problem_id": "", **point, "quantity": q, "value": "", "stderr": "", "seed": seed,
                 "status": f"error: {type(e).__name__}: {e}"} for q in quantities]
    rows = []
    for quantity in quantities:
        row = {**base, "quantity": quantity, "value": "", "stderr": "", "seed": seed}
        try:
            value, stderr, status = _compute_quantity(problem, quantity, evaluation, seed)
            if status == "ok" and not math.isfinite(value):
                status = "non_finite"
                value = ""
            row.update({"value": value, "stderr": "" if stderr is None else stderr, "status": status})
        except INFEASIBLE_ERRORS as e:
            row["status"] = f"infeasible: {type(e).__name__}: {e}"
        except (LdlrSdaError, ValueError, ArithmeticError) as e:
            row["status"] = f"error: {type(e).__name__}: {e}"
        rows.append(row)
    return rows


class VerificationPipeline:
    """
    Runs the verification suites, parameter sweeps, cloning tests and SQ simulations, writing
    one CSV per run plus a JSON manifest beside it.
    """
    def __init__(self, config_path: str = DEFAULT_CONFIG_PATH, seed: Optional[int] = None,
                 out_dir: Optional[str] = None, jobs: int = 1, cap_states: Optional[int] = None,
                 quiet: bool = False):
        self.logger = Logger().get_logger()
        self.config_path = config_path
        self.config = load_config(config_path)
        if cap_states is not None:
            self.config["numerics"]["state_cap"] = int(cap_states)
        configure_limits(self.config["numerics"])
        self.seed = int(self.config["seeds"]["default"] if seed is None else seed)
        self.out_dir = out_dir or self.config["output"]["directory"]
        self.jobs = max(1, int(jobs))
        self.quiet = quiet
        if quiet:
            Logger().set_level("WARNING")
        self.suites: Dict[str, Callable[[], List[CheckReport]]] = {
            "identities": self.identities_suite,
            "inequalities": self.inequalities_suite,
            "noise": self.noise_suite,
            "cloning": self.cloning_suite,
            "sq": self.sq_suite,
            "zoo": self.zoo_suite,
        }
        self.logger.info(f"Verification pipeline ready (seed={self.seed}, jobs={self.jobs})")

    def _progress(self, iterable, desc: str):
        return tqdm(iterable, desc=desc, disable=self.quiet)

    def _corpus(self):
        return finite_corpus(self.seed, self.config["suites"]["identity_corpus_size"])

    # ------------------------------------------------------------ suites

    def identities_suite(self) -> List[CheckReport]:
        """Multi-sample identity on the random corpus and the elementary-symmetric claims."""
        reports = []
        for instance in self._progress(self._corpus(), "identities"):
            report = identity_check(instance.problem, instance.m, instance.degree)
            reports.append(_with_problem_id(report, instance.problem.problem_id))
        for index in range(3):
            problem = random_product_instance(self.seed, index, n_coords=4)
            reports.append(_with_problem_id(symmetric_claims_check(problem), problem.problem_id))
        return reports

    def inequalities_suite(self) -> List[CheckReport]:
        reports = []
        corpus = self._corpus()
        for instance in self._progress(corpus, "inequalities"):
            problem, k = instance.problem, instance.even_k
            reports.append(_with_problem_id(holder_split_check(problem, instance.degree.d, k), problem.problem_id))
            reports.append(_with_problem_id(boosting_bound_check(problem, instance.m, instance.degree.d, k),
                                            problem.problem_id))
            reports.append(_with_problem_id(self._conditional_moment_report(problem, k), problem.problem_id))
        for instance in corpus[:10]:
            reports.append(_with_problem_id(monotonicity_check(instance.problem, (2, 3, 4), (0, 1, 2, math.inf),
                                                               (1, 2)), instance.problem.problem_id))
        for index in self._progress(range(self.config["suites"]["fact_corpus_size"]), "moment tail"):
            values, weights, p, q = random_discrete_variable(self.seed, index)
            reports.append(fact_moment_tail_check(values, weights, p, q))
        reports.extend(claims.ldlr_to_sda_on_zoo(claims.exact_zoo_instances(self.seed)))
        parity = make_sparse_parity(400, 40, seed=self.seed).problem
        reports.append(_with_problem_id(verify_sda_to_ldlr(parity, 2, 8), parity.problem_id))
        tensor = make_tensor_pca(6, 3, 0.4).problem
        reports.append(_with_problem_id(gaussian_high_degree_bound(tensor, 1, 2), tensor.problem_id))
        clique = make_multisample_hpc(6, 3, 2, 0.5).problem
        reports.append(_with_problem_id(product_high_degree_bound(clique, 1, 2), clique.problem_id))
        return reports

    @staticmethod
    @report_errors("conditional_moment")
    def _conditional_moment_report(problem, k: int, q: float = 2.0) -> CheckReport:
        tail, bound = conditional_moment_bound(correlation_atoms(problem), k, q)
        return margin_report("conditional_moment", tail, bound, values={"k": k, "q": q})

    def noise_suite(self) -> List[CheckReport]:
        reports = []
        rho = 0.4
        operator = MarkovOperator.noise_operator(rho, [0.5, 0.5])
        certificate = certify_d_eps(operator, [0.5, 0.5], 2, rho ** 2)
        reports.append(CheckReport("certify_d_eps", passed=certificate.certified and not certificate.borderline,
                                   values={"d": certificate.d, "eps": certificate.eps,
                                           "attenuation": certificate.attenuation}))
        for index in range(5):
            problem = random_product_instance(self.seed, index, n_coords=3, dense=True)
            reports.append(_with_problem_id(attenuation_check(problem, operator), problem.problem_id))
        coordinate = random_product_instance(self.seed, 0, n_coords=6)
        spec = RestrictionSpec(COORDINATE, 0.25, operator)
        reports.append(_with_problem_id(verify_restriction_bounds(coordinate, spec, 1, 2), coordinate.problem_id))
        reports.append(_with_problem_id(verify_noisy_sda(coordinate, operator, 16, 1, 2, 2), coordinate.problem_id))
        restricted = verify_restricted_sda(coordinate, spec, 16, 1, 2, 2, self.seed)
        restricted = _with_niceness(restricted, niceness_certificate(coordinate, 4, 2))
        reports.append(_with_problem_id(restricted, coordinate.problem_id))
        tensor = random_product_instance(self.seed, 1, n_coords=9)
        subtensor = RestrictionSpec(SUBTENSOR, 0.25, operator, p=2, n=3)
        reports.append(_with_problem_id(verify_restriction_bounds(tensor, subtensor, 1, 2), tensor.problem_id))
        return reports

    def cloning_suite(self) -> List[CheckReport]:
        settings = self.config["cloning"]
        reports = []
        for m in (1, 2, 3, 4):
            config = CloneConfig(m=m, gamma=0.3, seed=self.seed)
            reports.append(clone_round_trip_check(config))
            reports.append(householder_check(m))
            reports.append(bernoulli_gof_check(config, settings["trials"], settings["gof_alpha"]))
            reports.append(gaussian_moment_check(config, settings["trials"], mu=0.7))
        return reports

    def sq_suite(self) -> List[CheckReport]:
        trials = self.config["sq"]["trials"]
        cap = self.config["sq"]["query_cap"]
        rho, s = 0.8, 3
        reports = [parity_scan_tightness(8, s, 4, rho, trials, self.seed, cap)]
        family = make_sparse_parity(8, s, family_size=16, rho=rho, seed=self.seed).problem
        weak = rho ** (-2 * s) / 9.0
        reports.append(_with_problem_id(nonadaptive_consistency_check(family, weak, 200, self.seed, cap),
                                        family.problem_id))
        for instance in self._corpus()[:10]:
            reports.append(projection_distinguisher_check(instance.problem, instance.m, instance.degree))
        reports.extend(self._f_psi_reports())
        return reports

    def _f_psi_reports(self) -> List[CheckReport]:
        """Exact moments of the simulating polynomial on parity queries, m <= 8 and k <= 2."""
        rho, s = 0.9, 2
        problem = make_sparse_parity(6, s, family_size=4, rho=rho, seed=self.seed).problem
        queries = [ParityQuery(a.subset) for a in problem.prior.alternates]
        tau = rho ** (2 * s) / 2.0
        reports = []
        for m in (2, 4, 8):
            for k in (1, 2):
                f, report = build_f_psi(queries, problem, m, k, tau)
                reports.append(_with_problem_id(report, problem.problem_id))
                reports.append(_with_problem_id(truncation_check(f, math.inf, tau), problem.problem_id))
                if k % 2 == 0:
                    reports.append(_with_problem_id(truncation_check(f, s, tau), problem.problem_id))
        return reports

    def zoo_suite(self) -> List[CheckReport]:
        suites = self.config["suites"]
        reports = [claims.hpc_closed_form(6, 3, 2, q) for q in (0.5, 0.75)]
        for n in (6, 8):
            for r in (2, 3):
                for k in (2, 4):
                    reports.append(claims.tensor_pca_bounds(n, r, k, ms=(4, 8)))
        reports.append(claims.sparse_parity_tightness(8, 3, 3, 4, self.seed))
        reports.append(claims.hpc_fourier_identity(6, 3, 2, 0.5, 3, 2, 2))
        reports.append(claims.pds_fourier_identity(5, 2, 0.9, 0.5, 3, 1, 2))
        reports.append(claims.wishart_hermite_identity(4, 0.5, 0.3, 3, 2, 2))
        reports.append(claims.wishart_hermite_identity(8, 0.1, 0.3, 3, 2, 2))
        reports.append(claims.ggm_determinant_check(4, 200_000, self.seed))
        reports.append(claims.ggm_moment_check(60, 6, 3, 0.1, 2, suites["ggm_monte_carlo_budget"], self.seed))
        reports.append(claims.counterexample_check(suites["counterexample_n"], self.seed))
        return reports

    def run_suite(self, suite: str) -> List[SuiteResult]:
        """One suite, or all of them for "all"."""
        if suite == "all":
            names = list(SUITES)
        elif suite in self.suites:
            names = [suite]
        else:
            raise UnknownSuiteError(f"unknown suite {suite!r}; known: {', '.join(SUITES + ('all',))}")
        results = []
        for name in names:
            self.logger.info(f"Running suite {name}")
            result = SuiteResult(name, self.suites[name]())
            for failure in result.failures:
                self.logger.error(f"{name}: {failure.name} failed: {failure.error or failure.values}")
            self.logger.info(f"Suite {name}: {len(result.reports) - len(result.failures)}/{len(result.reports)} passed")
            results.append(result)
        return results

    def verify(self, suite: str, out_path: Optional[str] = None) -> Dict[str, Any]:
        """Runs a suite; writes the report CSV, the full JSON report and the manifest."""
        start = time.time()
        manifest = RunManifest(f"verify {suite}", self.seed, spec_hash({"suite": suite, "config": self.config}))
        results = self.run_suite(suite)
        out_path = out_path or os.path.join(self.out_dir, f"verify-{suite}.csv")
        records = [record for result in results for record in result.to_records()]
        save_records_to_csv(records, out_path, REPORT_COLUMNS)
        report_path = os.path.splitext(out_path)[0] + ".report.json"
        save_json({result.suite: [r.to_dict() for r in result.reports] for result in results}, report_path)
        for result in results:
            manifest.add_task(result.suite, "pass" if result.passed else "fail",
                              checks=len(result.reports), failures=len(result.failures))
        manifest.wall_clock = time.time() - start
        manifest.outputs = {"csv": out_path, "report": report_path}
        manifest.save(_manifest_path(out_path))
        return {"passed": all(r.passed for r in results), "results": results, "csv": out_path,
                "manifest": _manifest_path(out_path)}

    # ------------------------------------------------------------ sweeps

    def sweep(self, spec: SweepSpec, out_path: Optional[str] = None) -> Dict[str, Any]:
        """
        One row per grid point per quantity, in grid order whatever the completion order;
        each point gets a seed derived from (seed, grid index).
        """
        start = time.time()
        tasks = []
        for index, point in enumerate(spec.points()):
            problem_spec, evaluation = spec.split(point)
            tasks.append((index, point, problem_spec, evaluation, spec.quantities,
                          derive_seed(self.seed, "sweep", index), self.config["numerics"]))
        if self.jobs > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                chunks = list(self._progress(pool.map(evaluate_sweep_point, tasks), "sweep"))
        else:
            chunks = [evaluate_sweep_point(task) for task in self._progress(tasks, "sweep")]
        rows = [row for chunk in chunks for row in chunk]
        columns = ["problem_id"] + spec.axes + SWEEP_TAIL_COLUMNS
        out_path = out_path or spec.output or os.path.join(self.out_dir, "sweep.csv")
        frame = save_records_to_csv(rows, out_path, columns)
        feasible = frame["status"].isin(SUCCESS_STATUSES)
        manifest = RunManifest("sweep", self.seed, spec_hash(spec.to_dict()))
        for index, chunk in enumerate(chunks):
            statuses = sorted({row["status"] for row in chunk})
            manifest.add_task(f"point {index}", "ok" if all(s in SUCCESS_STATUSES for s in statuses) else
                              "; ".join(statuses))
        manifest.wall_clock = time.time() - start
        manifest.outputs = {"csv": out_path}
        manifest.save(_manifest_path(out_path))
        self.logger.info(f"Sweep wrote {len(rows)} rows to {out_path} ({int(feasible.sum())} feasible)")
        return {"rows": len(rows), "feasible": int(feasible.sum()), "csv": out_path,
                "infeasible_everywhere": not bool(feasible.any())}

    # ------------------------------------------------------------ cloning and SQ runs

    def clone_test(self, ms: Sequence[int], gamma: float, trials: Optional[int] = None, mu: float = 0.0,
                   out_path: Optional[str] = None) -> Dict[str, Any]:
        start = time.time()
        trials = int(trials or self.config["cloning"]["trials"])
        alpha = self.config["cloning"]["gof_alpha"]
        manifest = RunManifest("clone-test", self.seed,
                               spec_hash({"m": list(ms), "gamma": gamma, "trials": trials, "mu": mu}))
        reports = []
        for m in ms:
            config = CloneConfig(m=int(m), gamma=gamma, seed=self.seed)
            for report in (clone_round_trip_check(config), householder_check(int(m)),
                           bernoulli_gof_check(config, trials, alpha), gaussian_moment_check(config, trials, mu)):
                reports.append(report)
                manifest.add_task(f"{report.name} m={m}", "pass" if report else "fail")
        rows = [{"check": r.name, "passed": bool(r.passed), "margin": "" if r.margin is None else r.margin,
                 "error": r.error or "", **{k: v for k, v in r.values.items() if np.isscalar(v)}} for r in reports]
        out_path = out_path or os.path.join(self.out_dir, "clone-test.csv")
        save_records_to_csv(rows, out_path, ["check", "m", "passed", "margin", "error"])
        manifest.wall_clock = time.time() - start
        manifest.outputs = {"csv": out_path}
        manifest.save(_manifest_path(out_path))
        return {"passed": all(bool(r) for r in reports), "csv": out_path, "reports": reports}

    def sq_sim(self, problem_path: str, m_oracle: float, adversary: str = "honest", policy="parity_scan",
               trials: Optional[int] = None, out_path: Optional[str] = None,
               dump_transcripts: bool = False) -> Dict[str, Any]:
        start = time.time()
        trials = int(trials or self.config["sq"]["trials"])
        problem = load_problem_spec(problem_path, self.seed)
        policy = make_policy(policy)
        manifest = RunManifest("sq-sim", self.seed,
                               spec_hash({"problem": problem.problem_id, "m_oracle": m_oracle,
                                          "adversary": adversary, "policy": policy.describe(), "trials": trials}))
        report = run_sq_algorithm(policy, problem, m_oracle, adversary, trials, self.seed,
                                  self.config["sq"]["query_cap"], keep_transcripts=dump_transcripts,
                                  progress=not self.quiet)
        out_path = out_path or os.path.join(self.out_dir, "sq-sim.csv")
        save_records_to_csv([{"problem_id": problem.problem_id, **report.to_record(), "seed": self.seed}], out_path)
        manifest.outputs = {"csv": out_path}
        if dump_transcripts:
            transcript_path = os.path.splitext(out_path)[0] + ".transcripts.csv"
            pd.DataFrame(report.transcripts).to_csv(transcript_path, index=False, float_format="%.17g")
            manifest.outputs["transcripts"] = transcript_path
        manifest.add_task("simulation", "ok", success_rate=report.success_rate)
        manifest.wall_clock = time.time() - start
        manifest.save(_manifest_path(out_path))
        return {"report": report, "csv": out_path}
