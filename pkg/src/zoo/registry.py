"""
Name -> constructor table for the bundled problem families, as referenced from problem
specification files.
"""
import inspect
from typing import Any, Callable, Dict

from src.utils.errors import SpecFormatError
from src.zoo.counterexample import make_sda_counterexample
from src.zoo.ggm import make_prs_ggm
from src.zoo.instance import ZooInstance
from src.zoo.planted_clique import make_bipartite_pds, make_multisample_hpc
from src.zoo.sparse_parity import make_sparse_parity
from src.zoo.spiked_wishart import make_spiked_wishart
from src.zoo.tensor_pca import make_tensor_pca

ZOO: Dict[str, Callable[..., ZooInstance]] = {
    "tensor_pca": make_tensor_pca,
    "multisample_hpc": make_multisample_hpc,
    "bipartite_pds": make_bipartite_pds,
    "sparse_parity": make_sparse_parity,
    "spiked_wishart": make_spiked_wishart,
    "prs_ggm": make_prs_ggm,
    "sda_counterexample": make_sda_counterexample,
}

# spec files spell Greek parameters out
PARAMETER_ALIASES = {"lambda": "lam"}


def family_parameters(family: str):
    if family not in ZOO:
        raise SpecFormatError(f"unknown problem family {family!r}; known: {', '.join(sorted(ZOO))}")
    return list(inspect.signature(ZOO[family]).parameters)


def build_instance(family: str, params: Dict[str, Any], seed: int = 0) -> ZooInstance:
    """
    Construct a registered family from a parameter record; unknown names or parameters are a
    SpecFormatError. `seed` fills in the constructor's seed when the record has none.
    """
    accepted = family_parameters(family)
    kwargs = {PARAMETER_ALIASES.get(key, key): value for key, value in params.items() if key != "family"}
    unknown = sorted(set(kwargs) - set(accepted))
    if unknown:
        raise SpecFormatError(f"{family} does not take parameters {unknown}; accepted: {accepted}")
    if "seed" in accepted:
        kwargs.setdefault("seed", seed)
    try:
        return ZOO[family](**kwargs)
    except TypeError as e:
        raise SpecFormatError(f"bad parameters for {family}: {e}") from e
