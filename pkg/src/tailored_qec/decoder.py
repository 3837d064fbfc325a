"""Minimum-weight perfect-matching decoding under pluggable weight metrics.

Decoding runs on each sub-lattice separately. Every qubit is one edge of each
sub-lattice detector graph, so a correction is a set of flipped edges; the Pauli
letter laid on an edge of sub-lattice S is the letter the other sub-lattice measures
on that qubit, which flips S's checks and nothing else.

Additive metrics (Manhattan, weighted Manhattan, Dijkstra) give edge weights as
shortest-path lengths over the detector graph. Matching the complete defect graph
under those weights, with one virtual boundary copy per defect, has the same optimum
as a minimum-weight edge cover of the syndrome on the detector graph itself, which
is what PyMatching solves. The degeneracy metrics are not path sums, so they go
through the exact blossom matcher on the complete defect graph.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numba
import numpy as np
import pymatching
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.special import gammaln

from .geometry import SUBLATTICES, Lattice, StabilizerSite, Sublattice
from .matching import MatchingGraph, _solve, min_weight_perfect_matching
from .noise import NoiseModel, PairChannel, PairKind, flip_probabilities
from .pauli import X, Z, PauliOperator, anticommute_codes

# smallest probability fed to a logarithm; keeps weights finite on error-free qubits
MIN_PROB = 1e-12


class MetricKind(str, enum.Enum):
    MANHATTAN = "manhattan"
    WEIGHTED_MANHATTAN = "weighted_manhattan"
    DIJKSTRA = "dijkstra"
    DEGENERACY = "degeneracy"
    DEGENERACY_CORRELATION = "degeneracy_correlation"


@dataclass(frozen=True)
class WeightMetric:
    """Edge-weight rule. Unset parameters are derived from the noise at decode time.

    ``p1`` and ``p2`` are per-step probabilities: a single-qubit error moving a defect
    one unit, and a two-qubit error moving it one diagonal unit.
    """

    kind: MetricKind
    wx: float | None = None
    wz: float | None = None
    p1: float | None = None
    p2: float | None = None
    literal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        for name in ("wx", "wz"):
            v = getattr(self, name)
            if v is not None and (v < 0 or not math.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative")
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")

    @classmethod
    def manhattan(cls) -> WeightMetric:
        return cls(MetricKind.MANHATTAN)

    @classmethod
    def weighted_manhattan(cls, wx: float | None = None, wz: float | None = None) -> WeightMetric:
        return cls(MetricKind.WEIGHTED_MANHATTAN, wx=wx, wz=wz)

    @classmethod
    def dijkstra(cls) -> WeightMetric:
        return cls(MetricKind.DIJKSTRA)

    @classmethod
    def degeneracy(cls, p1: float | None = None, literal: bool = False) -> WeightMetric:
        return cls(MetricKind.DEGENERACY, p1=p1, literal=literal)

    @classmethod
    def degeneracy_plus_correlation(cls, p1: float | None = None, p2: float | None = None) -> WeightMetric:
        return cls(MetricKind.DEGENERACY_CORRELATION, p1=p1, p2=p2)

    @classmethod
    def from_name(cls, name: str) -> WeightMetric:
        if name == "degeneracy_literal":
            return cls.degeneracy(literal=True)
        return cls(MetricKind(name))

    @property
    def name(self) -> str:
        if self.kind is MetricKind.DEGENERACY and self.literal:
            return "degeneracy_literal"
        return self.kind.value

    @property
    def additive(self) -> bool:
        return self.kind in (MetricKind.MANHATTAN, MetricKind.WEIGHTED_MANHATTAN, MetricKind.DIJKSTRA)

    @property
    def needs_rates(self) -> bool:
        if self.kind is MetricKind.MANHATTAN:
            return False
        if self.kind is MetricKind.WEIGHTED_MANHATTAN:
            return self.wx is None or self.wz is None
        if self.kind is MetricKind.DEGENERACY:
            return self.p1 is None and not self.literal
        if self.kind is MetricKind.DEGENERACY_CORRELATION:
            return self.p1 is None or self.p2 is None
        return True


# noise as seen by the decoder ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoiseContext:
    """Rates, code letters and pair channel a metric may consult."""

    rates: np.ndarray  # (N, 3)
    v_letters: np.ndarray
    h_letters: np.ndarray
    pair_channel: PairChannel | None = None

    @classmethod
    def from_code(cls, code, noise: NoiseModel | None) -> NoiseContext:
        n = code.n_qubits
        rates = np.zeros((n, 3)) if noise is None else noise.rates
        pair = None if noise is None else noise.pair_channel
        return cls(rates, code.v_letters, code.h_letters, pair)

    def sublattice_letters(self, lattice: Lattice, sub: Sublattice) -> np.ndarray:
        in_h = lattice.h_sublattice if sub is Sublattice.PRIMAL else lattice.v_sublattice
        return np.where(in_h, self.h_letters, self.v_letters)

    def flip_probabilities(self, lattice: Lattice, sub: Sublattice) -> np.ndarray:
        return flip_probabilities(self.rates, self.sublattice_letters(lattice, sub))


def _letter_rate(rates: np.ndarray, letters: np.ndarray) -> np.ndarray:
    col = np.select([letters == X, letters == Z], [0, 2], 1)
    return rates[np.arange(len(letters)), col]


def weighted_manhattan_weights(ctx: NoiseContext) -> tuple[float, float]:
    """``wx = -ln <p_h>``, ``wz = -ln <p_m>`` with arithmetic means over qubits.

    Horizontal (x) steps are caused by the letter measured on the vertical pair
    and vice versa; for MHHM those are the high- and medium-rate letters.
    """
    px = float(np.mean(_letter_rate(ctx.rates, ctx.v_letters)))
    pz = float(np.mean(_letter_rate(ctx.rates, ctx.h_letters)))
    return -math.log(_check_prob(px)), -math.log(_check_prob(pz))


def _check_prob(p: float) -> float:
    if not 0 < p < 1:
        raise ValueError(f"log-based metric needs a probability in (0, 1), got {p}")
    return p


# static per-sub-lattice tables -------------------------------------------------------


class SublatticeTables:
    """Geometry of one detector graph needed by every metric."""

    def __init__(self, lattice: Lattice, sub: Sublattice):
        self.lattice = lattice
        self.sub = sub
        g = lattice.graphs[sub]
        self.graph = g
        self.n = g.n_nodes
        self.boundary = g.boundary
        self.coords = np.array(
            [lattice.stabilizers[s].coord for s in g.stabilizers], dtype=np.int64
        ).reshape(-1, 2)
        adj = g.adjacency(np.ones(lattice.n_qubits))
        n = self.n
        # defect-to-defect chains stay inside the lattice; boundary chains use a BFS
        # tree rooted at the boundary node
        inner_dist, inner_pred = csgraph.shortest_path(
            adj[:n, :n], unweighted=True, return_predecessors=True
        )
        self.inner_dist = inner_dist
        # the two opposite boundaries are kept apart: which side absorbs a defect
        # decides the logical class of the correction
        self.edge_side = _boundary_sides(lattice, g)
        self.side_length = np.zeros((2, n), np.int64)
        self.side_paths = np.zeros((2, n))
        # rows 0..n-1: interior trees; rows n, n+1: trees rooted at side 0, side 1
        self.pred = np.full((n + 2, n + 1), -9999, np.int64)
        self.pred[:n, :n] = inner_pred
        for side in (0, 1):
            sadj = _side_adjacency(g, self.edge_side, side, lattice.n_qubits)
            bdist, bpred = csgraph.shortest_path(
                sadj, unweighted=True, indices=self.boundary, return_predecessors=True
            )
            self.pred[n + side] = bpred
            reach = np.isfinite(bdist[:n])
            self.side_length[side] = np.where(reach, np.rint(np.where(reach, bdist[:n], 0)), -1)
            mult = _multiplicity(g, self.edge_side, side, n)
            self.side_paths[side] = _count_shortest_paths(mult, self.boundary, bdist)[:n]
        # edge_of[u, v] = qubit joining nodes u and v (first by id), -1 if none
        # rows n and n + 1 hold the boundary edge of each side
        self.edge_of = np.full((n + 2, n + 1), -1, np.int64)
        for (a, b), q in g.node_edge.items():
            if self.boundary not in (a, b):
                self.edge_of[a, b] = q
                self.edge_of[b, a] = q
        for q in np.flatnonzero(self.edge_side >= 0)[::-1]:
            a = [u for u in g.edge_nodes[q] if u != self.boundary][0]
            self.edge_of[n + self.edge_side[q], a] = q
        lengths = np.where(self.side_length >= 0, self.side_length, np.iinfo(np.int64).max)
        self.boundary_length = lengths.min(axis=0)
        self.boundary_paths = np.where(lengths == self.boundary_length, self.side_paths, 0.0).sum(axis=0)
        lx = np.abs(self.coords[:, None, 0] - self.coords[None, :, 0])
        lz = np.abs(self.coords[:, None, 1] - self.coords[None, :, 1])
        self.lx = lx
        self.lz = lz

    @functools.cached_property
    def check_matrix(self) -> sp.csc_matrix:
        return self.graph.check_matrix

    def node_of(self, stabilizer_id: int) -> int:
        return self.graph.local_index[stabilizer_id]


def _boundary_sides(lattice: Lattice, g) -> np.ndarray:
    """Side (0 or 1) of every boundary edge of ``g``; -1 for interior edges.

    The sides are the two extreme rows or columns the boundary qubits sit on.
    """
    coords = np.array([q.coord for q in lattice.qubits], dtype=np.int64)
    on_boundary = np.array([g.boundary in g.edge_nodes[q] for q in range(lattice.n_qubits)])
    side = np.full(lattice.n_qubits, -1, np.int64)
    for axis in (1, 0):
        vals = coords[on_boundary, axis]
        lo, hi = coords[:, axis].min(), coords[:, axis].max()
        if np.isin(vals, (lo, hi)).all():
            side[on_boundary] = (vals == hi).astype(np.int64)
            return side
    raise ValueError("boundary qubits do not lie on two opposite sides")


def _multiplicity(g, edge_side: np.ndarray, side: int, n: int) -> sp.csr_matrix:
    """Number of qubits joining each node pair, boundary edges of one side only."""
    use = (edge_side < 0) | (edge_side == side)
    ends = np.asarray(g.edge_nodes)[use]
    rows = np.concatenate([ends[:, 0], ends[:, 1]])
    cols = np.concatenate([ends[:, 1], ends[:, 0]])
    out = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    out.sum_duplicates()
    return out


def _side_adjacency(g, edge_side: np.ndarray, side: int, n_qubits: int) -> sp.csr_matrix:
    lengths = np.ones(n_qubits)
    lengths[(edge_side >= 0) & (edge_side != side)] = np.inf
    return _side_adjacency_weighted(g, lengths)


def _side_adjacency_weighted(g, lengths: np.ndarray) -> sp.csr_matrix:
    """Adjacency with infinite-length edges removed."""
    adj = g.adjacency(lengths).tocoo()
    keep = np.isfinite(adj.data)
    return sp.csr_matrix((adj.data[keep], (adj.row[keep], adj.col[keep])), shape=adj.shape)


def _count_shortest_paths(adj: sp.csr_matrix, source: int, dist: np.ndarray) -> np.ndarray:
    """Number of distinct shortest paths from ``source`` to each node (unit lengths).

    Entries of ``adj`` are edge multiplicities, so parallel edges give distinct paths.
    """
    n = adj.shape[0]
    order = np.argsort(dist, kind="stable")
    count = np.zeros(n, dtype=float)
    count[source] = 1.0
    indptr, indices, mult = adj.indptr, adj.indices, adj.data
    for u in order:
        if not np.isfinite(dist[u]):
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] == dist[u] + 1:
                count[w] += count[u] * mult[k]
    return count


@functools.lru_cache(maxsize=64)
def sublattice_tables(lattice: Lattice, sub: Sublattice) -> SublatticeTables:
    return SublatticeTables(lattice, sub)


# two-qubit move graph -----------------------------------------------------------------


def _pair_outcomes(channel: PairChannel) -> list[tuple[int, int, float]]:
    if channel.kind is PairKind.XX_ZZ:
        return [(X, X, channel.pxx), (Z, Z, channel.pzz)]
    return [(X, Z, 0.5), (Z, X, 0.5)]


def pair_moves(
    lattice: Lattice, ctx: NoiseContext, sub: Sublattice
) -> tuple[list[tuple[int, int]], float]:
    """Single-sub-lattice defect moves caused by one two-qubit event.

    Returns the moves as node pairs of ``sub``'s graph (boundary allowed) and the
    per-step probability ``p2 * <outcome probability>`` over contributing outcomes.
    """
    channel = ctx.pair_channel
    if channel is None:
        return [], 0.0
    g = {s: lattice.graphs[s] for s in SUBLATTICES}
    sides = {s: sublattice_tables(lattice, s).edge_side for s in SUBLATTICES}
    moves = []
    probs = []
    for a, b in lattice.nn_pairs:
        for la, lb, prob in _pair_outcomes(channel):
            odd = {s: set() for s in SUBLATTICES}
            hit = {s: set() for s in SUBLATTICES}
            for q, letter in ((a, la), (b, lb)):
                for pair, own in (("h", ctx.h_letters[q]), ("v", ctx.v_letters[q])):
                    if not anticommute_codes(letter, own):
                        continue
                    s = lattice.pair_sublattice(q, pair)
                    for node in g[s].edge_nodes[q]:
                        if node != g[s].boundary:
                            odd[s] ^= {int(node)}
                        else:
                            hit[s] ^= {int(sides[s][q])}
            if odd[sub.other] or not odd[sub] or len(odd[sub]) > 2:
                continue
            nodes = sorted(odd[sub])
            if len(nodes) == 1:
                if len(hit[sub]) != 1:
                    continue
                nodes.append(g[sub].boundary + hit[sub].pop())
            moves.append((nodes[0], nodes[1]))
            probs.append(prob)
    if not moves:
        return [], 0.0
    return moves, channel.p2 * float(np.mean(probs))


def _move_boundary_stats(n: int, boundary: int, moves: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Per side, the shortest move count to that boundary and the number of such sequences.

    Boundary targets in ``moves`` are ``boundary + side``.
    """
    lm = np.full((2, n), -1, np.int64)
    count = np.zeros((2, n))
    if not moves:
        return lm, count
    rows = [u for u, v in moves] + [v for u, v in moves]
    cols = [v for u, v in moves] + [u for u, v in moves]
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 2, n + 2))
    adj.data[:] = 1.0  # duplicates collapse to single adjacency
    for side in (0, 1):
        keep = np.ones(n + 2)
        keep[boundary + 1 - side] = 0.0
        mask = sp.diags(keep)
        sadj = (mask @ adj @ mask).tocsr()
        sadj.eliminate_zeros()
        dist = csgraph.shortest_path(sadj, unweighted=True, indices=boundary + side)
        paths = _count_shortest_paths(sadj, boundary + side, dist)
        lm[side] = np.where(np.isfinite(dist), dist, -1).astype(np.int64)[:n]
        count[side] = paths[:n]
    return lm, count


# metric evaluation ------------------------------------------------------------------


def log_binomial(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@dataclass
class CompleteWeights:
    """Weights of the complete defect graph for one sub-lattice, over all node pairs."""

    pair: np.ndarray  # (n, n)
    boundary: np.ndarray  # (n,)
    side: np.ndarray  # (n,) boundary side reached by the chosen boundary chain

    @classmethod
    def from_sides(cls, pair: np.ndarray, per_side: np.ndarray) -> CompleteWeights:
        """Keep the cheaper of the two boundary sides for every node."""
        side = np.argmin(per_side, axis=0)
        return cls(pair, per_side[side, np.arange(per_side.shape[1])], side.astype(np.int64))


def degeneracy_weights(tables: SublatticeTables, p1: float | None, literal: bool) -> CompleteWeights:
    lx, lz = tables.lx, tables.lz
    length = lx + lz
    lnc = log_binomial(length, lx)
    lb = _side_lengths(tables)
    with np.errstate(divide="ignore"):
        lnb = np.log(tables.side_paths)
    if literal:
        return CompleteWeights.from_sides(length - lnc, lb - lnb)
    c = -math.log(_check_prob(p1))
    return CompleteWeights.from_sides(
        np.maximum(length * c - lnc, 0.0), np.maximum(lb * c - lnb, 0.0)
    )


def _side_lengths(tables: SublatticeTables) -> np.ndarray:
    return np.where(tables.side_length >= 0, tables.side_length, np.inf).astype(float)


def degeneracy_correlation_weights(
    tables: SublatticeTables, p1: float, p2: float, moves: list[tuple[int, int]]
) -> CompleteWeights:
    lx, lz = tables.lx, tables.lz
    length = lx + lz
    ln_p1 = math.log(_check_prob(p1))
    ln_pair1 = log_binomial(length, lx) + length * ln_p1
    lm = np.maximum(lx, lz)
    even = (length % 2) == 0
    if p2 > 0:
        ln_p2 = math.log(_check_prob(p2))
        ln_pair2 = np.where(even, log_binomial(lm, length // 2) + lm * ln_p2, -np.inf)
    else:
        ln_pair2 = np.full_like(ln_pair1, -np.inf)
    pair = -np.logaddexp(ln_pair1, ln_pair2)
    lb = _side_lengths(tables)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_b1 = np.where(np.isfinite(lb), np.log(tables.side_paths) + lb * ln_p1, -np.inf)
    ln_b2 = np.full_like(ln_b1, -np.inf)
    if p2 > 0 and moves:
        mlen, mcount = _move_boundary_stats(tables.n, tables.boundary, moves)
        ok = mlen >= 0
        ln_b2[ok] = np.log(mcount[ok]) + mlen[ok] * math.log(p2)
    bnd = -np.logaddexp(ln_b1, ln_b2)
    # P1 + P2 can exceed one only for unphysically large rates
    return CompleteWeights.from_sides(np.maximum(pair, 0.0), np.maximum(bnd, 0.0))


def qubit_lengths(
    metric: WeightMetric, lattice: Lattice, sub: Sublattice, ctx: NoiseContext | None
) -> np.ndarray:
    """Per-qubit edge lengths of ``sub``'s detector graph for additive metrics."""
    n = lattice.n_qubits
    tables = sublattice_tables(lattice, sub)
    if metric.kind is MetricKind.MANHATTAN:
        return np.ones(n)
    if metric.kind is MetricKind.WEIGHTED_MANHATTAN:
        wx, wz = metric.wx, metric.wz
        if wx is None or wz is None:
            dwx, dwz = weighted_manhattan_weights(_need(ctx))
            wx = dwx if wx is None else wx
            wz = dwz if wz is None else wz
        return np.where(tables.graph.edge_axis == 0, wx, wz).astype(float)
    if metric.kind is MetricKind.DIJKSTRA:
        q = _need(ctx).flip_probabilities(lattice, sub)
        return -np.log(np.clip(q, MIN_PROB, 1.0))
    raise ValueError(f"{metric.kind.value} is not an additive metric")


def _need(ctx: NoiseContext | None) -> NoiseContext:
    if ctx is None:
        raise ValueError("this metric needs noise information")
    return ctx


def derived_p1(lattice: Lattice, sub: Sublattice, ctx: NoiseContext) -> float:
    return float(np.mean(ctx.flip_probabilities(lattice, sub)))


def complete_weights(
    metric: WeightMetric, lattice: Lattice, sub: Sublattice, ctx: NoiseContext | None
) -> CompleteWeights:
    """Pairwise and boundary weights for every node of ``sub`` under ``metric``."""
    tables = sublattice_tables(lattice, sub)
    if metric.additive:
        lengths = qubit_lengths(metric, lattice, sub, ctx)
        n = tables.n
        inner = csgraph.shortest_path(tables.graph.adjacency(lengths)[:n, :n], directed=False)
        per_side = np.empty((2, n))
        for side in (0, 1):
            masked = np.where((tables.edge_side >= 0) & (tables.edge_side != side), np.inf, lengths)
            adj = _side_adjacency_weighted(tables.graph, masked)
            per_side[side] = csgraph.shortest_path(adj, directed=False, indices=tables.boundary)[:n]
        clean = lambda a: np.where(a < 1e-200, 0.0, a)  # noqa: E731
        return CompleteWeights.from_sides(clean(inner), clean(per_side))
    if metric.kind is MetricKind.DEGENERACY:
        p1 = metric.p1
        if p1 is None and not metric.literal:
            p1 = derived_p1(lattice, sub, _need(ctx))
        return degeneracy_weights(tables, p1, metric.literal)
    p1 = metric.p1 if metric.p1 is not None else derived_p1(lattice, sub, _need(ctx))
    moves, step = ([], 0.0) if ctx is None else pair_moves(lattice, ctx, sub)
    p2 = metric.p2 if metric.p2 is not None else step
    return degeneracy_correlation_weights(tables, p1, p2, moves)


@dataclass(frozen=True)
class BoundaryNode:
    sublattice: Sublattice


def edge_weight(
    metric: WeightMetric,
    a: StabilizerSite,
    b: StabilizerSite | BoundaryNode,
    code,
    noise: NoiseModel | None = None,
) -> float:
    """Weight between two checks of one sub-lattice, or between a check and the boundary."""
    sub = a.sublattice
    if isinstance(b, StabilizerSite) and b.sublattice is not sub:
        raise ValueError("checks belong to different sub-lattices")
    if isinstance(b, BoundaryNode) and b.sublattice is not sub:
        raise ValueError("boundary belongs to a different sub-lattice")
    ctx = NoiseContext.from_code(code, noise) if noise is not None else None
    w = complete_weights(metric, code.lattice, sub, ctx)
    tables = sublattice_tables(code.lattice, sub)
    i = tables.node_of(a.id)
    if isinstance(b, BoundaryNode):
        return float(w.boundary[i])
    return float(w.pair[i, tables.node_of(b.id)])


# matching graphs ----------------------------------------------------------------------


def build_matching_graph(
    syndrome: np.ndarray, code, metric: WeightMetric, noise: NoiseModel | None = None
) -> dict[Sublattice, tuple[MatchingGraph, list[int]]]:
    """Complete defect graph per sub-lattice plus the defects' global stabilizer ids.

    Nodes ``0..k-1`` are the defects, ``k..2k-1`` their private boundary copies.
    """
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    ctx = NoiseContext.from_code(code, noise) if noise is not None else None
    out = {}
    for sub in SUBLATTICES:
        tables = sublattice_tables(code.lattice, sub)
        local = syndrome[list(tables.graph.stabilizers)]
        defects = np.flatnonzero(local)
        k = len(defects)
        graph = MatchingGraph(2 * k)
        if k:
            w = complete_weights(metric, code.lattice, sub, ctx)
            for x in range(k):
                for y in range(x + 1, k):
                    graph.add_edge(x, y, w.pair[defects[x], defects[y]])
                graph.add_edge(x, k + x, w.boundary[defects[x]])
                for y in range(x + 1, k):
                    graph.add_edge(k + x, k + y, 0.0)
        out[sub] = (graph, [tables.graph.stabilizers[d] for d in defects])
    return out


# compiled complete-graph decoding ------------------------------------------------------


@numba.njit(cache=True)
def _walk(tree, stop, dst, pred, edge_of, out):
    """Toggle the qubits along the path from ``dst`` back to ``stop`` in tree ``tree``.

    Interior trees are rooted at a node (``tree == stop``); boundary trees use rows
    past the boundary node, one per side.
    """
    node = dst
    while node != stop:
        prev = pred[tree, node]
        row = tree if prev == stop else prev
        out[edge_of[row, node]] ^= 1
        node = prev


@numba.njit(cache=True)
def _decode_complete_batch(syndromes, pair_w, bnd_w, side, pred, edge_of, boundary, n_qubits, scale):
    shots = syndromes.shape[0]
    out = np.zeros((shots, n_qubits), np.uint8)
    for s in range(shots):
        defects = np.flatnonzero(syndromes[s])
        k = defects.shape[0]
        if k == 0:
            continue
        # defect-defect edges are only useful when cheaper than both boundary routes
        m = 0
        cap = k * (k - 1) + k
        ei = np.empty(cap, np.int64)
        ej = np.empty(cap, np.int64)
        ew = np.empty(cap, np.int64)
        for x in range(k):
            bx = bnd_w[defects[x]]
            for y in range(x + 1, k):
                w = pair_w[defects[x], defects[y]]
                if w < bx + bnd_w[defects[y]]:
                    ei[m] = x
                    ej[m] = y
                    ew[m] = np.int64(np.rint(w * scale))
                    m += 1
            ei[m] = x
            ej[m] = k + x
            ew[m] = np.int64(np.rint(bx * scale))
            m += 1
            for y in range(x + 1, k):
                ei[m] = k + x
                ej[m] = k + y
                ew[m] = 0
                m += 1
        big = 0
        for e in range(m):
            if ew[e] > big:
                big = ew[e]
        big += 1
        for e in range(m):
            ew[e] = 2 * (big - ew[e])
        mate = _solve(2 * k, ei[:m].copy(), ej[:m].copy(), ew[:m].copy(), True)
        for x in range(k):
            y = mate[x]
            if y == k + x:
                _walk(boundary + side[defects[x]], boundary, defects[x], pred, edge_of, out[s])
            elif y < k and x < y:
                _walk(defects[x], defects[x], defects[y], pred, edge_of, out[s])
    return out


# decoder -------------------------------------------------------------------------


@dataclass(frozen=True)
class Correction:
    op: PauliOperator
    matched_pairs: list[tuple[int, int]] = field(default_factory=list)


BOUNDARY = -1


class MatchingDecoder:
    """Decoder for one lattice and metric; works on per-sub-lattice edge flips."""

    def __init__(self, lattice: Lattice, metric: WeightMetric):
        self.lattice = lattice
        self.metric = metric
        self.tables = {s: sublattice_tables(lattice, s) for s in SUBLATTICES}
        self._static: dict[Sublattice, tuple] = {}

    @property
    def needs_context(self) -> bool:
        return self.metric.needs_rates or self.metric.kind is MetricKind.DEGENERACY_CORRELATION

    def _memo(self, sub: Sublattice, ctx: NoiseContext | None, build):
        # weights are reused while the same context object is passed in
        key = ctx if self.needs_context else None
        hit = self._static.get(sub)
        if hit is not None and hit[0] is key:
            return hit[1]
        value = build()
        self._static[sub] = (key, value)
        return value

    def _pymatching(self, sub: Sublattice, ctx: NoiseContext | None) -> pymatching.Matching:
        def build():
            lengths = qubit_lengths(self.metric, self.lattice, sub, ctx)
            return pymatching.Matching.from_check_matrix(self.tables[sub].check_matrix, weights=lengths)

        return self._memo(sub, ctx, build)

    def _complete(self, sub: Sublattice, ctx: NoiseContext | None) -> CompleteWeights:
        return self._memo(sub, ctx, lambda: complete_weights(self.metric, self.lattice, sub, ctx))

    def decode_syndromes(
        self, sub: Sublattice, syndromes: np.ndarray, ctx: NoiseContext | None = None
    ) -> np.ndarray:
        """Edge corrections ``(shots, N)`` for syndromes ``(shots, n_checks)`` of ``sub``."""
        syndromes = np.ascontiguousarray(syndromes, dtype=np.uint8)
        if self.metric.additive:
            return self._pymatching(sub, ctx).decode_batch(syndromes).astype(np.uint8)
        t = self.tables[sub]
        w = self._complete(sub, ctx)
        top = max(float(w.pair.max(initial=0.0)), float(w.boundary.max(initial=0.0)))
        scale = min(1e6, 2.0**40 / max(top, 1.0))
        return _decode_complete_batch(
            syndromes, np.ascontiguousarray(w.pair), np.ascontiguousarray(w.boundary),
            np.ascontiguousarray(w.side, dtype=np.int64), t.pred, t.edge_of, t.boundary, self.lattice.n_qubits, scale,
        )

    def matched_pairs(
        self, sub: Sublattice, syndrome: np.ndarray, ctx: NoiseContext | None = None
    ) -> list[tuple[int, int]]:
        """Matched checks as global stabilizer ids; ``BOUNDARY`` marks the boundary."""
        t = self.tables[sub]
        syndrome = np.asarray(syndrome, dtype=np.uint8)
        ids = t.graph.stabilizers
        if self.metric.additive:
            arr = self._pymatching(sub, ctx).decode_to_matched_dets_array(syndrome)
            pairs = [
                tuple(sorted((ids[a] if a >= 0 else BOUNDARY, ids[b] if b >= 0 else BOUNDARY)))
                for a, b in arr
            ]
            return sorted(pairs)
        defects = np.flatnonzero(syndrome)
        k = len(defects)
        if k == 0:
            return []
        w = self._complete(sub, ctx)
        graph = MatchingGraph(2 * k)
        for x in range(k):
            for y in range(x + 1, k):
                graph.add_edge(x, y, w.pair[defects[x], defects[y]])
                graph.add_edge(k + x, k + y, 0.0)
            graph.add_edge(x, k + x, w.boundary[defects[x]])
        out = []
        for a, b in min_weight_perfect_matching(graph):
            if a < k and b < k:
                out.append(tuple(sorted((ids[defects[a]], ids[defects[b]]))))
            elif a < k:
                out.append((BOUNDARY, ids[defects[a]]))
        return sorted(out)

    def split_syndrome(self, syndrome: np.ndarray) -> dict[Sublattice, np.ndarray]:
        syndrome = np.asarray(syndrome, dtype=np.uint8)
        return {s: syndrome[..., list(self.tables[s].graph.stabilizers)] for s in SUBLATTICES}


def correction_operator(lattice: Lattice, ctx: NoiseContext, edges: dict[Sublattice, np.ndarray]) -> PauliOperator:
    """Pauli correction from per-sub-lattice flipped edges."""
    codes = np.zeros(lattice.n_qubits, dtype=np.uint8)
    for sub, flips in edges.items():
        other = ctx.sublattice_letters(lattice, sub.other)
        codes ^= np.where(np.asarray(flips, dtype=bool), other, 0).astype(np.uint8)
    return PauliOperator.from_codes(codes)


@functools.lru_cache(maxsize=32)
def _cached_decoder(lattice: Lattice, metric: WeightMetric) -> MatchingDecoder:
    return MatchingDecoder(lattice, metric)


def decode(
    syndrome: np.ndarray,
    code,
    metric: WeightMetric | None = None,
    noise: NoiseModel | None = None,
) -> Correction:
    """Correction that returns the code to the zero syndrome."""
    if code.v_letters is None:
        raise ValueError("decoding needs a consistent layout")
    metric = metric or WeightMetric.manhattan()
    decoder = _cached_decoder(code.lattice, metric)
    ctx = NoiseContext.from_code(code, noise)
    if noise is None and metric.needs_rates:
        raise ValueError(f"metric {metric.name} needs a noise model")
    parts = decoder.split_syndrome(syndrome)
    edges = {}
    pairs = []
    for sub in SUBLATTICES:
        edges[sub] = decoder.decode_syndromes(sub, parts[sub][None, :], ctx)[0]
        pairs += decoder.matched_pairs(sub, parts[sub], ctx)
    return Correction(correction_operator(code.lattice, ctx, edges), pairs)


def dump_matching_graphs(
    syndrome: np.ndarray, code, metric: WeightMetric, noise: NoiseModel | None = None
) -> str:
    """Edge-list text of both sub-lattice graphs with the chosen matching."""
    chunks = []
    for sub, (graph, ids) in build_matching_graph(syndrome, code, metric, noise).items():
        matching = min_weight_perfect_matching(graph) if graph.n_nodes else []
        chunks.append(f"# sublattice {sub.value} defects {ids}\n" + graph.to_text(matching))
    return "".join(chunks)
