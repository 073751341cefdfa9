from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from src.measures.kernels import TestingProblem


@dataclass
class ZooInstance:
    """
    A named testing problem with its parameter record and, where one exists, a closed-form
    correlation s -> <Dbar_u, Dbar_v> in terms of the family's pair statistic.
    """
    problem_id: str
    problem: TestingProblem
    params: Dict[str, Any] = field(default_factory=dict)
    correlation: Optional[Callable[..., np.ndarray]] = None
    extras: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def family(self) -> str:
        return self.params.get("family", self.problem_id.split("-")[0])

    def __repr__(self):
        return f"ZooInstance({self.problem_id})"
