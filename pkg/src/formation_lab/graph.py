"""Undirected weighted graphs, incidence matrices and Laplacians.

Node indices are 1-based when a :class:`Graph` is built (and in every
message or file), 0-based everywhere else in the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError


@dataclass(frozen=True)
class Graph:
    """Undirected graph with one fixed orientation per edge.

    Args:
        n: number of nodes (at least 2).
        edges: ordered ``(tail, head)`` pairs, 1-based.
        weights: positive weight per edge; defaults to all ones.

    The orientation is taken verbatim from ``edges``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        weights = tuple(float(w) for w in self.weights) if len(self.weights) else (1.0,) * len(edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        self._validate()

    def _validate(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"graph needs at least 2 nodes, got n={self.n}")
        if len(self.weights) != len(self.edges):
            raise ValidationError(
                f"{len(self.weights)} weights given for {len(self.edges)} edges"
            )
        seen: dict[frozenset[int], int] = {}
        for k, (t, h) in enumerate(self.edges, start=1):
            if not (1 <= t <= self.n and 1 <= h <= self.n):
                raise ValidationError(f"edge {k} ({t}, {h}): node index outside 1..{self.n}")
            if t == h:
                raise ValidationError(f"edge {k} ({t}, {h}) is a self-loop")
            key = frozenset((t, h))
            if key in seen:
                raise ValidationError(
                    f"edge {k} ({t}, {h}) duplicates edge {seen[key]} {self.edges[seen[key] - 1]}"
                )
            seen[key] = k
        for k, w in enumerate(self.weights, start=1):
            if not np.isfinite(w) or w <= 0:
                raise ValidationError(f"edge {k} {self.edges[k - 1]}: weight must be positive, got {w}")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def tails(self) -> NDArray[np.intp]:
        return np.array([t - 1 for t, _ in self.edges], dtype=np.intp)

    @property
    def heads(self) -> NDArray[np.intp]:
        return np.array([h - 1 for _, h in self.edges], dtype=np.intp)

    @property
    def weight_vector(self) -> NDArray[np.float64]:
        return np.asarray(self.weights, dtype=np.float64)

    def neighbors(self, i: int) -> list[int]:
        """Sorted 0-based neighbors of 0-based node ``i``."""
        out = [h - 1 for t, h in self.edges if t - 1 == i]
        out += [t - 1 for t, h in self.edges if h - 1 == i]
        return sorted(out)

    def edge_between(self, i: int, j: int) -> tuple[int, int]:
        """Return ``(k, sign)`` such that ``sign * z_k = p_i - p_j`` (0-based)."""
        for k, (t, h) in enumerate(self.edges):
            if (t - 1, h - 1) == (i, j):
                return k, 1
            if (t - 1, h - 1) == (j, i):
                return k, -1
        raise ValidationError(f"nodes {i + 1} and {j + 1} are not adjacent")

    def is_uniformly_weighted(self) -> bool:
        return len(set(self.weights)) <= 1


def lift(A: NDArray, m: int) -> NDArray[np.float64]:
    """Kronecker lift ``A ⊗ I_m`` to ``m`` ambient dimensions."""
    return np.kron(np.asarray(A, dtype=np.float64), np.eye(m))


def build_incidence(graph: Graph) -> NDArray[np.float64]:
    """Node-by-edge incidence matrix: +1 at the tail, -1 at the head."""
    B = np.zeros((graph.n, graph.num_edges))
    cols = np.arange(graph.num_edges)
    B[graph.tails, cols] = 1.0
    B[graph.heads, cols] = -1.0
    return B


def build_laplacian(graph: Graph) -> NDArray[np.float64]:
    """Weighted Laplacian assembled entrywise from neighbor weights."""
    L = np.zeros((graph.n, graph.n))
    for (t, h), w in zip(graph.edges, graph.weights):
        i, j = t - 1, h - 1
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w
    return L


def zero_tolerance(A: NDArray) -> float:
    """Magnitude below which an eigenvalue of ``A`` counts as zero."""
    return 1e-9 * max(1.0, float(np.linalg.norm(A, 2)))


def count_zero_eigenvalues(A: NDArray) -> int:
    ev = np.linalg.eigvals(A)
    return int(np.sum(np.abs(ev) < zero_tolerance(A)))


class GraphClass(NamedTuple):
    connected: bool
    tree: bool
    components: int
    min_eig_btb: float | None  # smallest eigenvalue of B^T B, recorded for trees


def classify_graph(graph: Graph) -> GraphClass:
    """Connectivity (by traversal) and tree status of ``graph``."""
    adj = csr_matrix(
        (np.ones(graph.num_edges), (graph.tails, graph.heads)), shape=(graph.n, graph.n)
    )
    ncomp, _ = connected_components(adj, directed=False)
    connected = ncomp == 1
    tree = connected and graph.num_edges == graph.n - 1
    lam = None
    if tree:
        B = build_incidence(graph)
        lam = float(np.min(np.linalg.eigvalsh(B.T @ B)))
        if lam <= 1e-9:
            raise ValidationError(
                f"tree graph with singular B^T B (min eigenvalue {lam:.3e}); this should not happen"
            )
    return GraphClass(connected, tree, int(ncomp), lam)


def require_connected(graph: Graph) -> None:
    if not classify_graph(graph).connected:
        raise ValidationError("graph not connected")


def random_tree(n: int, rng: np.random.Generator, weights: Sequence[float] | None = None) -> Graph:
    """Random labelled tree with random edge orientations (uniform attachment)."""
    order = rng.permutation(n)
    edges = []
    for idx in range(1, n):
        a = int(order[idx])
        b = int(order[rng.integers(idx)])
        edges.append((a + 1, b + 1) if rng.random() < 0.5 else (b + 1, a + 1))
    return Graph(n, tuple(edges), tuple(weights) if weights is not None else ())


def random_connected_graph(n: int, extra_edges: int, rng: np.random.Generator) -> Graph:
    """Random tree plus up to ``extra_edges`` chords, random positive weights."""
    tree = random_tree(n, rng)
    present = {frozenset(e) for e in tree.edges}
    edges = list(tree.edges)
    for _ in range(extra_edges):
        a, b = (int(x) + 1 for x in rng.choice(n, 2, replace=False))
        if frozenset((a, b)) not in present:
            present.add(frozenset((a, b)))
            edges.append((a, b))
    weights = tuple(rng.uniform(0.2, 5.0, len(edges)))
    return Graph(n, tuple(edges), weights)
