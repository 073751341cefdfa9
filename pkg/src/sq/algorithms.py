"""
Statistical-query algorithms as query policies, and their simulated success probability
against a VSTAT oracle under both hypotheses.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from src.measures.distributions import NULL, require_explicit
from src.measures.kernels import TestingProblem
from src.sda.dimension import sda
from src.sq.oracle import AdversaryLike, ParityQuery, Query, SqTranscript, VstatOracle, vstat_tolerance
from src.utils.errors import PreconditionError, SpecFormatError, UnsupportedBackendError
from src.utils.logger import Logger
from src.utils.report_utils import CheckReport, report_errors
from src.utils.seeding import derive_rng
from src.zoo.sparse_parity import ParityAlternate, make_sparse_parity

logger = Logger().get_logger()

NULL_VERDICT = "null"
ALTERNATE_VERDICT = "alternate"
DEFAULT_QUERY_CAP = 100_000
CONSISTENCY_MAX_SUCCESS = 0.99

Action = Union[Query, str]


class SqPolicy:
    """
    Maps the transcript so far to the next query or to a verdict. `start` is called before
    every run with the oracle parameter and a per-run generator.
    """
    name = "policy"

    def start(self, problem: TestingProblem, m_oracle: float, rng: np.random.Generator) -> None:
        pass

    def step(self, transcript: SqTranscript) -> Action:
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        return {"policy": self.name}


class EmptyPolicy(SqPolicy):
    """Asks nothing and always answers null."""
    name = "empty"

    def step(self, transcript):
        return NULL_VERDICT


def family_subsets(problem: TestingProblem) -> List[tuple]:
    alternates = require_explicit(problem.prior).alternates
    if not all(isinstance(a, ParityAlternate) for a in alternates):
        raise UnsupportedBackendError("parity policies need a prior over parity alternates")
    return [a.subset for a in alternates]


class ParityScanPolicy(SqPolicy):
    """
    Nonadaptive: asks phi_S = (1 + x^S)/2 for every listed S (the prior's family by default)
    and answers alternate iff some answer reaches 1/2 + tau(1/2).
    """
    name = "parity_scan"

    def __init__(self, subsets: Optional[Sequence[Sequence[int]]] = None):
        self.subsets = None if subsets is None else [tuple(sorted(s)) for s in subsets]
        self._queries: List[ParityQuery] = []
        self.threshold = 0.5

    def _family(self, problem: TestingProblem) -> List[tuple]:
        return self.subsets if self.subsets is not None else family_subsets(problem)

    def start(self, problem, m_oracle, rng):
        self._queries = [ParityQuery(s) for s in self._family(problem)]
        self.threshold = 0.5 + vstat_tolerance(0.5, m_oracle)

    def step(self, transcript):
        if len(transcript) < len(self._queries):
            return self._queries[len(transcript)]
        hit = any(answer >= self.threshold for answer in transcript.answers)
        return ALTERNATE_VERDICT if hit else NULL_VERDICT

    def describe(self):
        return {"policy": self.name, "queries": len(self._queries) or None}


class FirstQPolicy(ParityScanPolicy):
    """The parity scan restricted to the first q subsets of the family."""
    name = "first_q"

    def __init__(self, q: int, subsets: Optional[Sequence[Sequence[int]]] = None):
        if q < 0:
            raise PreconditionError(f"q={q} must be nonnegative", subject="q")
        super().__init__(subsets)
        self.q = int(q)

    def _family(self, problem):
        return super()._family(problem)[:self.q]

    def describe(self):
        return {"policy": self.name, "q": self.q}


POLICIES = {"empty": EmptyPolicy, "parity_scan": ParityScanPolicy, "first_q": FirstQPolicy}


def make_policy(spec: Union[str, Dict[str, Any], SqPolicy]) -> SqPolicy:
    """A policy from its name, or a record {"policy": name, ...constructor arguments}."""
    if isinstance(spec, SqPolicy):
        return spec
    if isinstance(spec, str):
        spec = {"policy": spec}
    if not isinstance(spec, dict) or spec.get("policy") not in POLICIES:
        raise SpecFormatError(f"unknown policy {spec!r}; known: {', '.join(POLICIES)}")
    kwargs = {k: v for k, v in spec.items() if k != "policy"}
    try:
        return POLICIES[spec["policy"]](**kwargs)
    except TypeError as e:
        raise SpecFormatError(f"bad arguments for policy {spec['policy']}: {e}") from e


@dataclass
class SqRunReport:
    policy: Dict[str, Any]
    adversary: str
    m_oracle: float
    trials: int
    type_one_errors: int = 0
    type_two_errors: int = 0
    queries: int = 0
    transcripts: List[Dict] = field(default_factory=list, repr=False)

    @property
    def type_one_rate(self) -> float:
        return self.type_one_errors / self.trials if self.trials else math.nan

    @property
    def type_two_rate(self) -> float:
        return self.type_two_errors / self.trials if self.trials else math.nan

    @property
    def success_rate(self) -> float:
        """Average of the success probabilities under the null and under the alternate."""
        return 1.0 - 0.5 * (self.type_one_rate + self.type_two_rate)

    def to_record(self) -> Dict[str, Any]:
        return {**{f"policy_{k}" if k != "policy" else k: v for k, v in self.policy.items()},
                "adversary": self.adversary, "m_oracle": self.m_oracle, "trials": self.trials,
                "type_one_rate": self.type_one_rate, "type_two_rate": self.type_two_rate,
                "success_rate": self.success_rate,
                "mean_queries": self.queries / (2 * self.trials) if self.trials else math.nan}


def _run_once(policy: SqPolicy, oracle: VstatOracle, problem: TestingProblem, rng) -> str:
    policy.start(problem, oracle.m, rng)
    while True:
        action = policy.step(oracle.transcript)
        if isinstance(action, Query):
            oracle.answer(action)
        elif action in (NULL_VERDICT, ALTERNATE_VERDICT):
            return action
        else:
            raise PreconditionError(f"policy {policy.name} returned {action!r}", subject="policy")


def run_sq_algorithm(policy: Union[str, Dict, SqPolicy], problem: TestingProblem, m_oracle: float,
                     adversary: AdversaryLike = "honest", trials: int = 1000, seed: int = 0,
                     query_cap: Optional[int] = DEFAULT_QUERY_CAP, keep_transcripts: bool = False,
                     progress: bool = False) -> SqRunReport:
    """
    Each trial draws u from the prior and runs the policy once against VSTAT(m_oracle) on the
    null and once on D_u; both runs and the draw are seeded from (seed, trial).
    """
    if trials < 1:
        raise PreconditionError(f"trials={trials} must be positive", subject="trials")
    policy = make_policy(policy)
    report = None
    for trial in tqdm(range(trials), desc=f"sq {policy.name}", disable=not progress):
        alternate = problem.prior.sample(derive_rng(seed, "trial", trial), 1)[0]
        for hypothesis, distribution in ((NULL_VERDICT, NULL), (ALTERNATE_VERDICT, alternate)):
            oracle = VstatOracle(problem, distribution, m_oracle, adversary, query_cap,
                                 rng=derive_rng(seed, "oracle", hypothesis, trial))
            if report is None:
                report = SqRunReport(policy.describe(), oracle.adversary.name, m_oracle, trials)
            verdict = _run_once(policy, oracle, problem, derive_rng(seed, "policy", hypothesis, trial))
            report.queries += len(oracle.transcript)
            if verdict != hypothesis:
                if hypothesis == NULL_VERDICT:
                    report.type_one_errors += 1
                else:
                    report.type_two_errors += 1
            if keep_transcripts:
                report.transcripts.extend(oracle.transcript.to_records(trial=trial, hypothesis=hypothesis,
                                                                       verdict=verdict))
    report.policy = policy.describe()
    logger.info(f"{problem.problem_id}: {policy.name} vs {report.adversary} VSTAT({m_oracle:.6g}) "
                f"success {report.success_rate:.4f} over {trials} trials")
    return report


@report_errors("nonadaptive_consistency")
def nonadaptive_consistency_check(problem: TestingProblem, m_oracle: float, trials: int = 200,
                                  seed: int = 0, query_cap: Optional[int] = DEFAULT_QUERY_CAP) -> CheckReport:
    """
    With q* = SDA(problem, 3 m_oracle), no scan of at most q* parities succeeds with probability
    above 0.99 against the toward-null adversary at VSTAT(m_oracle).
    """
    family = len(family_subsets(problem))
    q_star = sda(problem, 3.0 * m_oracle).q
    top = int(min(q_star, family))
    sizes = sorted({q for q in (1, 2, 4, 8, 16, 32, 64, top) if 1 <= q <= top})
    runs = [run_sq_algorithm(FirstQPolicy(q), problem, m_oracle, "toward_null", trials, seed, query_cap)
            for q in sizes]
    best = max((r.success_rate for r in runs), default=0.0)
    return CheckReport("nonadaptive_consistency", passed=best <= CONSISTENCY_MAX_SUCCESS,
                       margin=CONSISTENCY_MAX_SUCCESS - best,
                       values={"problem_id": problem.problem_id, "m_oracle": m_oracle, "sda_q": q_star,
                               "family": family, "runs": [r.to_record() for r in runs]})


@report_errors("parity_scan_tightness")
def parity_scan_tightness(n: int, s: int, k: int, rho: float, trials: int = 1000, seed: int = 0,
                          query_cap: Optional[int] = DEFAULT_QUERY_CAP) -> CheckReport:
    """
    On 2^k parities of strength rho^s the scan of every parity succeeds with rate >= 0.99
    against honest VSTAT(9 rho^{-2s}) and with rate <= 1/2 against the toward-null adversary
    at VSTAT(rho^{-2s} / 9).
    """
    problem = make_sparse_parity(n, s, family_size=2 ** k, rho=rho, seed=seed).problem
    base = rho ** (-2.0 * s)
    strong = run_sq_algorithm("parity_scan", problem, 9.0 * base, "honest", trials, seed, query_cap)
    weak = run_sq_algorithm("parity_scan", problem, base / 9.0, "toward_null", trials, seed, query_cap)
    passed = strong.success_rate >= 0.99 and weak.success_rate <= 0.5
    return CheckReport("parity_scan_tightness", passed=passed, margin=strong.success_rate - 0.99,
                       values={"n": n, "s": s, "k": k, "rho": rho, "queries": 2 ** k,
                               "honest": strong.to_record(), "toward_null": weak.to_record()})
