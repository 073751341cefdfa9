import json

import numpy as np
import pytest

from src.measures import distributions
from src.measures.distributions import ExplicitPrior, ProductAlternate, ProductNull
from src.measures.kernels import TestingProblem
from src.utils.data_utils import DEFAULT_CONFIG

ROOT_SEED = 7


@pytest.fixture
def seed():
    return ROOT_SEED


@pytest.fixture
def rng():
    return np.random.default_rng(ROOT_SEED)


@pytest.fixture(autouse=True)
def restore_limits():
    saved = dict(distributions.LIMITS)
    yield
    distributions.LIMITS.clear()
    distributions.LIMITS.update(saved)


@pytest.fixture
def sign_problem():
    """Two biased product alternates over {-1, 1}^2 against the uniform null."""
    null = ProductNull.uniform_signs(2)
    alternates = [ProductAlternate([[0.3, 0.7], [0.5, 0.5]], "a"),
                  ProductAlternate([[0.6, 0.4], [0.2, 0.8]], "b")]
    return TestingProblem(null, ExplicitPrior(alternates), problem_id="signs-2")


@pytest.fixture
def small_config(tmp_path):
    """A config file with corpora and trial counts small enough for unit tests."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    config["logging"]["file_path"] = str(tmp_path / "logs" / "ldlr_sda.log")
    config["suites"].update({"identity_corpus_size": 5, "fact_corpus_size": 5,
                             "ggm_monte_carlo_budget": 50})
    config["sq"]["trials"] = 20
    config["cloning"]["trials"] = 4000
    config["output"]["directory"] = str(tmp_path / "results")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return str(path)
