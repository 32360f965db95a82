"""Hypo-elliptic graph diffusion node features via a low-rank recursion.

Random walks on a graph induce, at each start node, the expectation of the
algebra-lifted walk history: the product over walk steps of tensor
exponentials of node-feature increments.  Contracting that expectation
against rank-1 functionals never requires tensor arithmetic: for each level
the recursion propagates the suffix contractions

    g_k[m][t](i) = sum_j P_ij sum_{r=0}^{m-t} c_r (prod_{s=1}^{r} <v_{m,t+s}, e_ij>) g_{k-1}[m][t+r](j)

over walk length ``k``, where ``e_ij`` is the edge increment and ``c_r`` the
algebra-lift coefficients (``1/r!`` for the tensor exponential).  A dense
walk-enumeration oracle built on the exact tensor algebra arbitrates every
convention at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensoralg
from .errors import CapacityError, ConfigurationError, DomainError, InputError, ShapeError
from .parallel import parallel_map
from .tensoralg import Rank1Element, algebra_mul, densify, scaled_power_lift


@dataclass
class Graph:
    """A weighted directed graph with vector node attributes.

    Edges are ``(src, dst, weight)`` with strictly positive weights; an
    undirected graph lists both directions.  Isolated nodes are allowed and
    become absorbing (all-zero transition row), so their walk features
    reduce to the level-0 constant.
    """

    num_nodes: int
    edges: list[tuple[int, int, float]]
    features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise ShapeError(f"features must have shape (num_nodes, d), got {feats.shape}")
        self.features = feats
        for src, dst, w in self.edges:
            if not (0 <= src < self.num_nodes and 0 <= dst < self.num_nodes):
                raise InputError(f"edge ({src}, {dst}) references a missing node")
            if not (np.isfinite(w) and w > 0):
                raise DomainError(f"edge ({src}, {dst}) has nonpositive weight {w}")

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class WalkFeatureConfig:
    """Walk length, truncation, functionals, and lift variations.

    ``increments`` multiplies tensor-exponential lifts of feature differences
    along edges (the default); without it the lift of the target node's
    features is used.  ``zero_start`` premultiplies by the lift of the start
    node's features, removing translation invariance.  ``level_coeffs``
    overrides the per-level lift coefficients (default ``1/m!``).
    """

    walk_length: int
    trunc: int
    functionals: tuple
    zero_start: bool = False
    increments: bool = True
    level_coeffs: tuple | None = None

    def __post_init__(self):
        if self.walk_length < 0:
            raise ConfigurationError("walk length must be nonnegative")
        if self.trunc < 1:
            raise ConfigurationError("truncation level must be at least 1")
        if len(self.functionals) < 1:
            raise ConfigurationError("need at least one functional")
        if self.level_coeffs is not None and len(self.level_coeffs) != self.trunc + 1:
            raise ShapeError(f"need {self.trunc + 1} level coefficients")

    def coeffs(self) -> np.ndarray:
        if self.level_coeffs is not None:
            return np.asarray(self.level_coeffs, dtype=float)
        return np.array([1.0 / math.factorial(m) for m in range(self.trunc + 1)])


def transition_matrix(g: Graph) -> np.ndarray:
    """Row-stochastic walk matrix ``P[i, j] = c_ij / sum_j' c_ij'``.

    Isolated nodes keep an all-zero row (absorbing convention).
    """
    P = np.zeros((g.num_nodes, g.num_nodes))
    for src, dst, w in g.edges:
        P[src, dst] += w
    sums = P.sum(axis=1, keepdims=True)
    np.divide(P, sums, out=P, where=sums > 0)
    return P


def _edge_values(g: Graph, increments: bool) -> np.ndarray:
    """Per-edge lift inputs: feature increments along edges, or target features."""
    out = np.empty((len(g.edges), g.dim))
    for e, (src, dst, _) in enumerate(g.edges):
        out[e] = g.features[dst] - g.features[src] if increments else g.features[dst]
    return out


def _check_functionals(g: Graph, cfg: WalkFeatureConfig) -> None:
    for ell in cfg.functionals:
        if not isinstance(ell, Rank1Element):
            raise ShapeError("functionals must be Rank1Element instances")
        if ell.dim != g.dim:
            raise ShapeError(f"functional dimension {ell.dim} does not match graph dimension {g.dim}")
        if ell.trunc != cfg.trunc:
            raise ShapeError("functional truncation must match the config truncation")


def hypoelliptic_features(g: Graph, cfg: WalkFeatureConfig, jobs: int = 1) -> np.ndarray:
    """Rank-1 contractions of expected walk-history lifts, per node.

    Returns an array of shape ``(num_nodes, trunc + 1, n_functionals)``:
    entry ``[i, m, j]`` is the level-``m`` contraction for walks of length
    ``walk_length`` started at node ``i``.  Level 0 is the functional's
    scalar coefficient.  Cost ``O(k M^2 E)`` per functional.
    """
    _check_functionals(g, cfg)
    coeffs = cfg.coeffs()
    n, k = g.num_nodes, cfg.walk_length
    src = np.array([e[0] for e in g.edges], dtype=int)
    dst = np.array([e[1] for e in g.edges], dtype=int)
    P = transition_matrix(g)
    p_edge = P[src, dst] if g.edges else np.zeros(0)
    evals = _edge_values(g, cfg.increments)

    def one_functional(ell: Rank1Element) -> np.ndarray:
        out = np.zeros((n, cfg.trunc + 1))
        # degree 0: walk mass surviving k steps, scaled by the lift's scalar coefficient
        mass = np.ones(n)
        for _ in range(k):
            nxt = np.zeros(n)
            if len(g.edges):
                np.add.at(nxt, src, p_edge * mass[dst])
            mass = coeffs[0] * nxt
        out[:, 0] = ell.scalar * (coeffs[0] * mass if cfg.zero_start else mass)
        for m in range(1, cfg.trunc + 1):
            comps = ell.level_components(m)
            edge_dots = [evals @ v for v in comps] if len(g.edges) else None
            # suffix[t] holds <v_{m,t+1} x ... x v_{m,m}, current expectation>
            suffix = [np.zeros(n) for _ in range(m)] + [np.ones(n)]
            for _ in range(k):
                new_suffix = []
                for t in range(m + 1):
                    acc = np.zeros(n)
                    if len(g.edges):
                        np.add.at(acc, src, coeffs[0] * p_edge * suffix[t][dst])
                        run = p_edge.copy()
                        for r in range(1, m - t + 1):
                            run = run * edge_dots[t + r - 1]
                            np.add.at(acc, src, coeffs[r] * run * suffix[t + r][dst])
                    new_suffix.append(acc)
                suffix = new_suffix
            vals = suffix[0]
            if cfg.zero_start:
                start_dots = [g.features @ v for v in comps]
                combo = coeffs[0] * suffix[0]
                run = np.ones(n)
                for r in range(1, m + 1):
                    run = run * start_dots[r - 1]
                    combo = combo + coeffs[r] * run * suffix[r]
                vals = combo
            out[:, m] = vals
        return out

    per_functional = parallel_map(one_functional, list(cfg.functionals), jobs)
    return np.stack(per_functional, axis=-1)


def walk_oracle(g: Graph, cfg: WalkFeatureConfig) -> np.ndarray:
    """Enumerate all walks and contract dense algebra products; test oracle.

    Exponentially expensive; guarded to ``n <= 8``, ``k <= 4`` and small
    dense tensors.  Independent of :func:`hypoelliptic_features`: it builds
    each walk's lift with exact tensor-algebra products and weights it by
    the walk probability.
    """
    _check_functionals(g, cfg)
    if g.num_nodes > 8 or cfg.walk_length > 4:
        raise CapacityError("walk oracle limited to n <= 8 and k <= 4")
    tensoralg._check_capacity(g.dim, cfg.trunc)
    coeffs = cfg.coeffs()
    P = transition_matrix(g)
    neighbors = [np.flatnonzero(P[i]) for i in range(g.num_nodes)]
    dense_functionals = [densify(ell) for ell in cfg.functionals]
    out = np.zeros((g.num_nodes, cfg.trunc + 1, len(cfg.functionals)))

    def walk_tensor(path) -> tensoralg.TruncatedTensorSeries:
        acc = tensoralg.unit(g.dim, cfg.trunc)
        if cfg.zero_start:
            acc = scaled_power_lift(g.features[path[0]], coeffs)
        for a, b in zip(path[:-1], path[1:]):
            step = g.features[b] - g.features[a] if cfg.increments else g.features[b]
            acc = algebra_mul(acc, scaled_power_lift(step, coeffs))
        return acc

    for start in range(g.num_nodes):
        expected = tensoralg.zero(g.dim, cfg.trunc)
        stack = [((start,), 1.0)]
        for _ in range(cfg.walk_length):
            nxt = []
            for path, prob in stack:
                for j in neighbors[path[-1]]:
                    nxt.append((path + (int(j),), prob * P[path[-1], j]))
            stack = nxt
        for path, prob in stack:
            tensor = walk_tensor(path)
            for m in range(cfg.trunc + 1):
                expected.levels[m] += prob * tensor.levels[m]
        for j, dense in enumerate(dense_functionals):
            for m in range(cfg.trunc + 1):
                out[start, m, j] = float(dense.levels[m] @ expected.levels[m])
    return out


def mean_pool(node_values: np.ndarray) -> np.ndarray:
    """Average node features into a graph-level vector, per (level, functional)."""
    node_values = np.asarray(node_values, dtype=float)
    if node_values.shape[0] == 0:
        raise InputError("cannot pool an empty graph")
    return node_values.mean(axis=0)


def read_graph_csv(edge_path, feature_path, undirected: bool = False) -> tuple[Graph, list[str]]:
    """Read a graph from an edge CSV ``src,dst,weight`` and a node-feature CSV.

    Node ids are opaque strings; the returned list maps row index to id.
    With ``undirected`` each edge is expanded into both directions.
    """
    import csv as _csv

    ids: list[str] = []
    feats = []
    with open(feature_path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "node":
            raise InputError(f"{feature_path}: expected header 'node,c0,...'")
        d = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise InputError(f"{feature_path}:{lineno}: expected {d + 1} columns")
            ids.append(row[0])
            try:
                feats.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise InputError(f"{feature_path}:{lineno}: non-numeric value ({exc})") from None
    if not ids:
        raise InputError(f"{feature_path}: no nodes")
    index = {nid: k for k, nid in enumerate(ids)}
    edges: list[tuple[int, int, float]] = []
    with open(edge_path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["src", "dst"]:
            raise InputError(f"{edge_path}: expected header 'src,dst[,weight]'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if row[0] not in index or row[1] not in index:
                raise InputError(f"{edge_path}:{lineno}: dangling node reference {row[:2]}")
            w = float(row[2]) if len(row) > 2 and row[2] != "" else 1.0
            edges.append((index[row[0]], index[row[1]], w))
            if undirected:
                edges.append((index[row[1]], index[row[0]], w))
    return Graph(len(ids), edges, np.array(feats)), ids
