"""Undirected topologies, weighted Laplacians and the Jacobi eigensolver."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-12
ZERO_EIG_TOL = 1e-9


class TopologyError(ValueError):
    """Invalid or disconnected graph."""


class ConvergenceError(RuntimeError):
    """Eigensolver hit its sweep cap."""


@dataclass(frozen=True)
class Topology:
    """Undirected graph on nodes 1..M with normalized edges (k < j)."""

    node_count: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="", compare=False)

    @property
    def m(self) -> int:
        return self.node_count

    def neighbors(self, k: int) -> list[int]:
        out = [j for a, j in self.edges if a == k]
        out += [a for a, j in self.edges if j == k]
        return sorted(out)

    def has_edge(self, k: int, j: int) -> bool:
        return (min(k, j), max(k, j)) in set(self.edges)

    def all_pairs(self) -> list[tuple[int, int]]:
        """Every unordered pair (k, j), k < j, in lexicographic order."""
        m = self.node_count
        return [(k, j) for k in range(1, m + 1) for j in range(k + 1, m + 1)]

    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """0-based pair indices and the edge indicator over all pairs."""
        pairs = self.all_pairs()
        edge_set = set(self.edges)
        pi = np.array([k - 1 for k, _ in pairs], dtype=np.int64)
        pj = np.array([j - 1 for _, j in pairs], dtype=np.int64)
        beta = np.array([1.0 if p in edge_set else 0.0 for p in pairs])
        return pi, pj, beta

    def edge_mask(self) -> np.ndarray:
        return self.pair_arrays()[2].astype(bool)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


def _components(node_count: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, list[int]] = {k: [] for k in range(1, node_count + 1)}
    for k, j in edges:
        adj[k].append(j)
        adj[j].append(k)
    seen: set[int] = set()
    comps = []
    for start in range(1, node_count + 1):
        if start in seen:
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def is_connected(t: Topology) -> bool:
    """True iff a breadth-first search from node 1 reaches all M nodes."""
    if t.node_count < 1:
        return False
    return len(_components(t.node_count, t.edges)[0]) == t.node_count


def load_topology(node_count: int, edge_list: Iterable[Sequence[int]], name: str = "") -> Topology:
    """Validate and normalize an edge list (1-based indices) into a Topology.

    Duplicate edges (in either orientation) collapse to one.  Self-loops,
    out-of-range indices and disconnected graphs raise ``TopologyError``.
    """
    if int(node_count) != node_count or node_count < 1:
        raise TopologyError(f"node count must be a positive integer, got {node_count!r}")
    node_count = int(node_count)
    edges = set()
    for raw in edge_list:
        if len(raw) != 2:
            raise TopologyError(f"edge {tuple(raw)!r} must have exactly two endpoints")
        k, j = (int(v) for v in raw)
        for v in (k, j):
            if not 1 <= v <= node_count:
                raise TopologyError(f"edge {{{k},{j}}}: node index {v} outside 1..{node_count}")
        if k == j:
            raise TopologyError(f"edge {{{k},{j}}} is a self-loop")
        edges.add((min(k, j), max(k, j)))
    comps = _components(node_count, edges)
    if len(comps) > 1:
        detail = "; ".join("{" + ",".join(map(str, c)) + "}" for c in comps)
        raise TopologyError(f"graph is disconnected: {len(comps)} components {detail}")
    return Topology(node_count, tuple(sorted(edges)), name)


def parse_edge_list(text: str, name: str = "") -> Topology:
    """Parse the edge-list text format: first line ``M``, then ``k j`` lines.

    Blank lines and lines starting with ``#`` are ignored.
    """
    lines = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s and not s.startswith("#"):
            lines.append((lineno, s))
    if not lines:
        raise TopologyError("edge list is empty: expected node count on the first line")
    lineno, first = lines[0]
    try:
        m = int(first)
    except ValueError:
        raise TopologyError(f"line {lineno}: expected node count, got {first!r}") from None
    edges = []
    for lineno, s in lines[1:]:
        parts = s.split()
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected 'k j', got {s!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer node index in {s!r}") from None
    return load_topology(m, edges, name)


def read_edge_list(path: str | Path) -> Topology:
    path = Path(path)
    return parse_edge_list(path.read_text(), name=path.stem)


def format_edge_list(t: Topology) -> str:
    lines = [f"# {t.name}" if t.name else "# topology", str(t.node_count)]
    lines += [f"{k} {j}" for k, j in t.edges]
    return "\n".join(lines) + "\n"


# Builtin library.  paper6 is the fixed 6-node reference topology:
# the ring 1-2-3-4-5-6-1 plus the chord {2,5}.
def _ring(m):
    return [(k, k % m + 1) for k in range(1, m + 1)]


BUILTIN_EDGES: dict[str, tuple[int, list[tuple[int, int]]]] = {
    "p2": (2, [(1, 2)]),
    "path6": (6, [(k, k + 1) for k in range(1, 6)]),
    "cycle6": (6, _ring(6)),
    "star6": (6, [(1, j) for j in range(2, 7)]),
    "complete6": (6, [(k, j) for k in range(1, 7) for j in range(k + 1, 7)]),
    "paper6": (6, _ring(6) + [(2, 5)]),
}


def builtin_topology(name: str) -> Topology:
    try:
        m, edges = BUILTIN_EDGES[name]
    except KeyError:
        raise TopologyError(f"unknown builtin topology {name!r}; choose from {sorted(BUILTIN_EDGES)}") from None
    return load_topology(m, edges, name)


def resolve_topology(source: str) -> Topology:
    """A builtin name or a path to an edge-list file."""
    if source in BUILTIN_EDGES:
        return builtin_topology(source)
    path = Path(source)
    if not path.exists():
        raise TopologyError(f"topology {source!r} is neither a builtin ({', '.join(BUILTIN_EDGES)}) nor a file")
    return read_edge_list(path)


def _weight_vector(t: Topology, weights) -> np.ndarray:
    """Per-pair weights over ``t.all_pairs()``.

    Accepts a scalar, a mapping {(k, j): w}, an array over all pairs, or an
    array over the edges only.
    """
    pairs = t.all_pairs()
    npair = len(pairs)
    if weights is None:
        return np.ones(npair)
    if np.isscalar(weights):
        return np.full(npair, float(weights))
    if isinstance(weights, Mapping):
        out = np.zeros(npair)
        index = {p: i for i, p in enumerate(pairs)}
        for (k, j), w in weights.items():
            out[index[(min(k, j), max(k, j))]] = float(w)
        missing = [e for e in t.edges if e not in weights and e[::-1] not in weights]
        if missing:
            raise ValueError(f"no weight given for edge(s) {missing}")
        return out
    arr = np.asarray(weights, dtype=float).ravel()
    if arr.size == npair:
        return arr.copy()
    if arr.size == len(t.edges):
        out = np.zeros(npair)
        index = {p: i for i, p in enumerate(pairs)}
        for e, w in zip(t.edges, arr):
            out[index[e]] = w
        return out
    raise ValueError(f"expected {npair} pair weights or {len(t.edges)} edge weights, got {arr.size}")


def laplacian(t: Topology, weights=1.0) -> np.ndarray:
    """Weighted Laplacian; non-edge pairs contribute nothing (beta = 0)."""
    w = _weight_vector(t, weights)
    pi, pj, beta = t.pair_arrays()
    eff = beta * w
    if np.any(eff < 0):
        bad = [t.all_pairs()[i] for i in np.flatnonzero(eff < 0)]
        raise ValueError(f"negative weight on edge(s) {bad}")
    m = t.node_count
    lap = np.zeros((m, m))
    lap[pi, pj] = -eff
    lap[pj, pi] = -eff
    lap[np.arange(m), np.arange(m)] = -lap.sum(axis=1)
    return lap


def symmetric_eigendecomposition(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> Spectrum:
    """Cyclic Jacobi eigendecomposition, eigenvalues ascending.

    Ties keep the order in which the rotations left them (stable sort).
    Raises ``ValueError`` for asymmetric input and ``ConvergenceError`` if
    the sweep cap is reached.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    vals, vecs, sweeps, ok = kernels.jacobi_kernel(np.ascontiguousarray(a), tol, max_sweeps)
    if not ok:
        raise ConvergenceError(f"Jacobi did not converge within {max_sweeps} sweeps")
    order = np.argsort(vals, kind="stable")
    return Spectrum(vals[order], vecs[:, order], int(sweeps))


def algebraic_connectivity(t: Topology, weights=1.0) -> float:
    """Second-smallest Laplacian eigenvalue (lambda_2)."""
    spec = symmetric_eigendecomposition(laplacian(t, weights))
    lam = spec.eigenvalues
    if len(lam) < 2 or lam[1] <= ZERO_EIG_TOL:
        raise TopologyError(
            "graph is not connected: second Laplacian eigenvalue is "
            f"{lam[1] if len(lam) > 1 else 0.0:.3e}"
        )
    return float(lam[1])
