"""Surface-code lattices: qubit and stabilizer indexing, sub-lattice grids, boundaries.

Non-rotated layout
    Qubits and checks live on a fine grid of ``(2*d2 - 1)`` rows by ``(2*d1 - 1)``
    columns. Qubits sit at ``row + col`` even, checks at ``row + col`` odd.
    Primal cells (plaquettes) are at (even row, odd col), dual cells (stars) at
    (odd row, even col).

Rotated layout
    ``d2 x d1`` data qubits at ``(i, j)``; faces ``(a, b)`` with ``0 <= a <= d2``,
    ``0 <= b <= d1``. Interior faces are weight 4, weight-2 faces sit on the edges
    in the usual checkerboard. Primal faces have ``(a + b)`` odd and carry the
    top/bottom weight-2 checks; dual faces carry the left/right ones.

Every qubit has two same-sub-lattice neighbour pairs. The *h* pair is the one whose
members are separated by a unit step along the sub-lattice ``x`` axis, the *v* pair
by a unit step along ``z``. For the non-rotated layout these are the horizontal and
vertical neighbours; for the rotated layout they are the NW/SE and NE/SW faces.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class Layout(str, enum.Enum):
    NON_ROTATED = "non_rotated"
    ROTATED = "rotated"


class Sublattice(str, enum.Enum):
    PRIMAL = "primal"
    DUAL = "dual"

    @property
    def other(self) -> Sublattice:
        return Sublattice.DUAL if self is Sublattice.PRIMAL else Sublattice.PRIMAL


SUBLATTICES = (Sublattice.PRIMAL, Sublattice.DUAL)


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice size in vertices: ``d1`` horizontal, ``d2`` vertical."""

    d1: int
    d2: int
    layout: Layout = Layout.NON_ROTATED

    def __post_init__(self):
        if int(self.d1) != self.d1 or int(self.d2) != self.d2:
            raise ValueError("lattice dimensions must be integers")
        if self.d1 < 2 or self.d2 < 2:
            raise ValueError(f"lattice dimensions must be >= 2, got d1={self.d1}, d2={self.d2}")
        object.__setattr__(self, "layout", Layout(self.layout))

    @classmethod
    def square(cls, d: int, layout: Layout | str = Layout.NON_ROTATED) -> LatticeSpec:
        return cls(d, d, Layout(layout))

    @property
    def distance(self) -> int:
        return min(self.d1, self.d2)

    @property
    def n_qubits(self) -> int:
        if self.layout is Layout.ROTATED:
            return self.d1 * self.d2
        return self.d1 * self.d2 + (self.d1 - 1) * (self.d2 - 1)


@dataclass(frozen=True)
class SiteIndex:
    id: int
    coord: tuple[int, int]


@dataclass(frozen=True)
class StabilizerSite:
    """A check cell.

    ``coord`` is the ``(x, z)`` position on the grid of its own sub-lattice, in which
    a single-qubit flip moves a defect by one unit. ``position`` is the raw lattice
    position (fine-grid row/col, or face row/col for the rotated layout).
    """

    id: int
    sublattice: Sublattice
    support: tuple[int, ...]
    coord: tuple[int, int]
    position: tuple[int, int]


@dataclass(frozen=True)
class Displacement:
    lx: int
    lz: int

    def __post_init__(self):
        if self.lx < 0 or self.lz < 0:
            raise ValueError("displacement components are nonnegative")

    @property
    def length(self) -> int:
        return self.lx + self.lz

    @property
    def lm(self) -> int:
        return max(self.lx, self.lz)


@dataclass(frozen=True)
class BoundarySite:
    """Virtual check just outside the lattice, reached through one boundary qubit."""

    sublattice: Sublattice
    coord: tuple[int, int]
    qubit: int


@dataclass(frozen=True)
class SublatticeGraph:
    """Detector graph of one sub-lattice: nodes are its checks, edges are qubits.

    Every qubit is exactly one edge. ``boundary`` (== ``n_nodes``) is the shared
    virtual boundary node used for qubits with a single neighbour in this sub-lattice.
    """

    sublattice: Sublattice
    stabilizers: tuple[int, ...]  # global stabilizer ids, local index order
    edge_nodes: np.ndarray  # (N, 2) local node ids; second entry is boundary for boundary edges
    edge_axis: np.ndarray  # (N,) 0 for x steps, 1 for z steps
    check_matrix: sp.csc_matrix  # (n_nodes, N) incidence, boundary node dropped

    @property
    def n_nodes(self) -> int:
        return len(self.stabilizers)

    @property
    def boundary(self) -> int:
        return len(self.stabilizers)

    @functools.cached_property
    def local_index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.stabilizers)}

    @functools.cached_property
    def node_edge(self) -> dict[tuple[int, int], int]:
        """Map from a sorted local node pair to the qubit joining them (first by id)."""
        table: dict[tuple[int, int], int] = {}
        for q, (a, b) in enumerate(self.edge_nodes):
            key = (min(a, b), max(a, b))
            table.setdefault(key, q)
        return table

    def adjacency(self, lengths: np.ndarray) -> sp.csr_matrix:
        """Symmetric weighted adjacency over nodes plus the boundary node.

        Parallel edges keep the shortest length.
        """
        n = self.n_nodes + 1
        best: dict[tuple[int, int], float] = {}
        for q, (a, b) in enumerate(self.edge_nodes):
            key = (min(a, b), max(a, b))
            w = float(lengths[q])
            if key not in best or w < best[key]:
                best[key] = w
        rows, cols, vals = [], [], []
        for (a, b), w in best.items():
            rows += [a, b]
            cols += [b, a]
            vals += [w, w]
        # csgraph treats explicit zeros as missing edges
        vals = np.maximum(np.asarray(vals, dtype=float), 1e-300)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class Lattice:
    """A built lattice. Immutable after construction."""

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        if spec.layout is Layout.NON_ROTATED:
            self._build_non_rotated()
        else:
            self._build_rotated()
        self._finish()

    # construction ------------------------------------------------------

    def _build_non_rotated(self):
        d1, d2 = self.spec.d1, self.spec.d2
        rows, cols = 2 * d2 - 1, 2 * d1 - 1
        qpos = [(r, c) for r in range(rows) for c in range(cols) if (r + c) % 2 == 0]
        spos = [(r, c) for r in range(rows) for c in range(cols) if (r + c) % 2 == 1]
        qindex = {p: i for i, p in enumerate(qpos)}
        sindex = {p: i for i, p in enumerate(spos)}

        def sub_of(pos):
            return Sublattice.PRIMAL if pos[0] % 2 == 0 else Sublattice.DUAL

        def grid(pos):
            r, c = pos
            if r % 2 == 0:  # primal
                return ((c - 1) // 2, r // 2)
            return (c // 2, (r - 1) // 2)

        stabs = []
        for s, (r, c) in enumerate(spos):
            support = tuple(
                qindex[q] for q in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)) if q in qindex
            )
            stabs.append(StabilizerSite(s, sub_of((r, c)), support, grid((r, c)), (r, c)))

        h_pairs, v_pairs = [], []
        for r, c in qpos:
            h_pairs.append([(r, c - 1), (r, c + 1)])
            v_pairs.append([(r - 1, c), (r + 1, c)])
        self._pos_to_stab = sindex
        self._grid_of = grid
        self._sub_of = sub_of
        self.qubits = [SiteIndex(i, p) for i, p in enumerate(qpos)]
        self.stabilizers = stabs
        self._raw_pairs = (h_pairs, v_pairs)
        # nearest neighbours share a vertex: fine-grid diagonal offsets
        nn = []
        for i, (r, c) in enumerate(qpos):
            for dr, dc in ((1, -1), (1, 1)):
                j = qindex.get((r + dr, c + dc))
                if j is not None:
                    nn.append((i, j))
        self.nn_pairs = sorted(nn)
        # logical candidate lines: even rows and even columns
        self.row_lines = [[qindex[(r, c)] for c in range(0, cols, 2)] for r in range(0, rows, 2)]
        self.col_lines = [[qindex[(r, c)] for r in range(0, rows, 2)] for c in range(0, cols, 2)]

    def _build_rotated(self):
        d1, d2 = self.spec.d1, self.spec.d2
        qpos = [(i, j) for i in range(d2) for j in range(d1)]
        qindex = {p: k for k, p in enumerate(qpos)}

        def color(pos):
            return (pos[0] + pos[1]) % 2

        primal_color = 1

        def sub_of(pos):
            return Sublattice.PRIMAL if color(pos) == primal_color else Sublattice.DUAL

        def exists(a, b):
            if 1 <= a <= d2 - 1 and 1 <= b <= d1 - 1:
                return True
            if a in (0, d2) and 1 <= b <= d1 - 1:
                return sub_of((a, b)) is Sublattice.PRIMAL
            if b in (0, d1) and 1 <= a <= d2 - 1:
                return sub_of((a, b)) is Sublattice.DUAL
            return False

        def grid(pos):
            a, b = pos
            c = color(pos)
            return ((a + b - c) // 2, (a - b - c) // 2)

        spos = [(a, b) for a in range(d2 + 1) for b in range(d1 + 1) if exists(a, b)]
        sindex = {p: k for k, p in enumerate(spos)}
        stabs = []
        for s, (a, b) in enumerate(spos):
            support = tuple(
                qindex[q]
                for q in ((a - 1, b - 1), (a - 1, b), (a, b - 1), (a, b))
                if q in qindex
            )
            stabs.append(StabilizerSite(s, sub_of((a, b)), support, grid((a, b)), (a, b)))

        h_pairs, v_pairs = [], []
        for i, j in qpos:
            h_pairs.append([(i, j), (i + 1, j + 1)])  # NW, SE
            v_pairs.append([(i, j + 1), (i + 1, j)])  # NE, SW
        self._pos_to_stab = sindex
        self._grid_of = grid
        self._sub_of = sub_of
        self.qubits = [SiteIndex(k, p) for k, p in enumerate(qpos)]
        self.stabilizers = stabs
        self._raw_pairs = (h_pairs, v_pairs)
        nn = []
        for k, (i, j) in enumerate(qpos):
            for di, dj in ((0, 1), (1, 0)):
                m = qindex.get((i + di, j + dj))
                if m is not None:
                    nn.append((k, m))
        self.nn_pairs = sorted(nn)
        self.row_lines = [[qindex[(i, j)] for j in range(d1)] for i in range(d2)]
        self.col_lines = [[qindex[(i, j)] for i in range(d2)] for j in range(d1)]

    def _finish(self):
        h_raw, v_raw = self._raw_pairs
        n = len(self.qubits)
        self.h_stabs: list[tuple[int, ...]] = []
        self.v_stabs: list[tuple[int, ...]] = []
        h_sub, v_sub = [], []
        self.boundary_sites: dict[Sublattice, list[BoundarySite]] = {s: [] for s in SUBLATTICES}
        for q in range(n):
            for raw, out, subs in ((h_raw[q], self.h_stabs, h_sub), (v_raw[q], self.v_stabs, v_sub)):
                present = tuple(self._pos_to_stab[p] for p in raw if p in self._pos_to_stab)
                sub = self._sub_of(raw[0])
                out.append(present)
                subs.append(sub)
                if len(present) == 1:
                    missing = next(p for p in raw if p not in self._pos_to_stab)
                    self.boundary_sites[sub].append(BoundarySite(sub, self._grid_of(missing), q))
                if not present:
                    raise AssertionError(f"qubit {q} has no neighbours in a sub-lattice")
        self.h_sublattice = np.array([s is Sublattice.PRIMAL for s in h_sub], dtype=bool)
        self.v_sublattice = ~self.h_sublattice
        del self._raw_pairs

    # queries -------------------------------------------------------------

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def n_stabilizers(self) -> int:
        return len(self.stabilizers)

    def stabilizers_of(self, sublattice: Sublattice) -> list[StabilizerSite]:
        return [s for s in self.stabilizers if s.sublattice is sublattice]

    def pair_sublattice(self, qubit: int, pair: str) -> Sublattice:
        primal = self.h_sublattice[qubit] if pair == "h" else self.v_sublattice[qubit]
        return Sublattice.PRIMAL if primal else Sublattice.DUAL

    def pair_in(self, qubit: int, sublattice: Sublattice) -> str:
        """Which of the qubit's neighbour pairs ('h' or 'v') lies in ``sublattice``."""
        return "h" if self.pair_sublattice(qubit, "h") is sublattice else "v"

    def neighbours(self, qubit: int, pair: str) -> tuple[int, ...]:
        return self.h_stabs[qubit] if pair == "h" else self.v_stabs[qubit]

    @functools.cached_property
    def graphs(self) -> dict[Sublattice, SublatticeGraph]:
        return {s: self._sublattice_graph(s) for s in SUBLATTICES}

    def _sublattice_graph(self, sub: Sublattice) -> SublatticeGraph:
        stabs = tuple(s.id for s in self.stabilizers if s.sublattice is sub)
        local = {s: i for i, s in enumerate(stabs)}
        boundary = len(stabs)
        n = self.n_qubits
        edge_nodes = np.empty((n, 2), dtype=np.int64)
        edge_axis = np.empty(n, dtype=np.int8)
        rows, cols = [], []
        for q in range(n):
            pair = self.pair_in(q, sub)
            members = [local[s] for s in self.neighbours(q, pair)]
            edge_axis[q] = 0 if pair == "h" else 1
            if len(members) == 2:
                edge_nodes[q] = members
            else:
                edge_nodes[q] = (members[0], boundary)
            for m in members:
                rows.append(m)
                cols.append(q)
        h = sp.csc_matrix(
            (np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(len(stabs), n)
        )
        return SublatticeGraph(sub, stabs, edge_nodes, edge_axis, h)

    def stabilizer_displacement(self, a: StabilizerSite, b: StabilizerSite) -> Displacement:
        if a.sublattice is not b.sublattice:
            raise ValueError("stabilizers belong to different sub-lattices")
        return Displacement(abs(a.coord[0] - b.coord[0]), abs(a.coord[1] - b.coord[1]))

    def boundary_displacements(self, a: StabilizerSite) -> list[Displacement]:
        return [
            Displacement(abs(a.coord[0] - s.coord[0]), abs(a.coord[1] - s.coord[1]))
            for s in self.boundary_sites[a.sublattice]
        ]

    def boundary_distance(self, a: StabilizerSite) -> Displacement:
        """Shortest displacement from ``a`` to a boundary absorbing its defects."""
        return min(self.boundary_displacements(a), key=lambda d: (d.length, d.lx, d.lz))

    @functools.cached_property
    def logical_lines(self) -> tuple[list[list[int]], list[list[int]]]:
        return self.row_lines, self.col_lines


def build_lattice(spec: LatticeSpec) -> Lattice:
    return _cached_lattice(spec)


@functools.lru_cache(maxsize=64)
def _cached_lattice(spec: LatticeSpec) -> Lattice:
    return Lattice(spec)


def planar_qubit_count(d1: int, d2: int) -> int:
    return d1 * d2 + (d1 - 1) * (d2 - 1)


def matched_rectangle(d: int, aspect: float) -> LatticeSpec:
    """Rectangle holding about as many qubits as the square distance-``d`` code.

    For every height ``d2`` the widest ``d1`` whose qubit count does not exceed the
    square count by more than one qubit is a candidate; the candidate whose ``d1/d2``
    is closest to ``aspect`` in log space wins, ties going to the larger ``d2``.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if aspect <= 0:
        raise ValueError("aspect must be positive")
    limit = planar_qubit_count(d, d) + 1
    best = None
    d2 = 2
    while planar_qubit_count(2, d2) <= limit:
        d1 = 2
        while planar_qubit_count(d1 + 1, d2) <= limit:
            d1 += 1
        key = (abs(np.log(d1 / d2) - np.log(aspect)), -d2)
        if best is None or key < best[0]:
            best = (key, d1, d2)
        d2 += 1
    return LatticeSpec(best[1], best[2])
