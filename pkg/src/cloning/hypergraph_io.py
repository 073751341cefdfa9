"""
Hypergraph bitmap files.

    # comment lines start with '#'
    N s
    0110...      one line per graph, C(N, s) characters, hyperedges in colex order

Hyperedge e of the bitmap is the e-th s-subset of range(N) in colexicographic order.
"""
import math
import os
from typing import Iterable, Tuple

import numpy as np

from src.utils.errors import DimensionMismatchError, SpecFormatError
from src.utils.logger import Logger
from src.utils.numerics import colex_subsets

logger = Logger().get_logger()


def hyperedges(N: int, s: int) -> np.ndarray:
    return colex_subsets(N, s)


def colex_rank(subset: Iterable[int]) -> int:
    """Position of a sorted s-subset in colexicographic order: sum_i C(c_i, i + 1)."""
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(subset)))


def clique_edges(N: int, s: int, vertices: Iterable[int]) -> np.ndarray:
    """Indicator of the hyperedges contained in `vertices`."""
    members = np.zeros(N, dtype=bool)
    members[list(vertices)] = True
    return np.all(members[hyperedges(N, s)], axis=1)


def planted_hypergraph(N: int, s: int, K: int, gamma: float, rng: np.random.Generator,
                       planted: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    G_s(N, gamma) with a planted K-clique on a uniform vertex set (or none). Returns the
    indicator vector and the per-edge probabilities (gamma or 1).
    """
    edges = math.comb(N, s)
    probs = np.full(edges, gamma)
    if planted and K:
        vertices = rng.choice(N, size=K, replace=False)
        probs[clique_edges(N, s, vertices)] = 1.0
    return (rng.random(edges) < probs).astype(np.int8), probs


def write_hypergraphs(path: str, graphs, N: int, s: int) -> None:
    graphs = np.atleast_2d(np.asarray(graphs))
    if graphs.shape[1] != math.comb(N, s):
        raise DimensionMismatchError(f"{graphs.shape[1]} indicators for C({N},{s}) = {math.comb(N, s)} hyperedges")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(f"{N} {s}\n")
        for row in graphs:
            f.write("".join("1" if b else "0" for b in row) + "\n")


def read_hypergraphs(path: str) -> Tuple[np.ndarray, int, int]:
    """(graphs as an (m, C(N, s)) int8 array, N, s)."""
    with open(path) as f:
        lines = [line.strip() for line in f if line.strip() and not line.startswith("#")]
    if not lines:
        raise SpecFormatError(f"{path}: missing 'N s' header")
    try:
        N, s = (int(tok) for tok in lines[0].split())
    except ValueError as e:
        raise SpecFormatError(f"{path}: malformed header {lines[0]!r}") from e
    width = math.comb(N, s)
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        if len(line) != width or set(line) - {"0", "1"}:
            raise SpecFormatError(f"{path}:{number}: expected {width} bits")
        rows.append([c == "1" for c in line])
    logger.debug(f"read {len(rows)} hypergraphs over C({N},{s}) from {path}")
    return np.array(rows, dtype=np.int8).reshape(-1, width), N, s
