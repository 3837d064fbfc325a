from __future__ import annotations

import collections
import math

import numpy as np
import pytest

from tailored_qec.geometry import (
    Displacement,
    Layout,
    LatticeSpec,
    Sublattice,
    build_lattice,
    matched_rectangle,
    planar_qubit_count,
)


@pytest.mark.parametrize(
    "d1,d2,layout,qubits,stabs",
    [
        (3, 3, Layout.NON_ROTATED, 13, 12),
        (2, 2, Layout.NON_ROTATED, 5, 4),
        (3, 3, Layout.ROTATED, 9, 8),
        (5, 5, Layout.ROTATED, 25, 24),
        (4, 6, Layout.NON_ROTATED, 4 * 6 + 3 * 5, 4 * 6 + 3 * 5 - 1),
    ],
)
def test_counts(d1, d2, layout, qubits, stabs):
    lat = build_lattice(LatticeSpec(d1, d2, layout))
    assert lat.n_qubits == qubits
    assert lat.n_stabilizers == stabs
    assert LatticeSpec(d1, d2, layout).n_qubits == qubits


def test_rotated_d3_enumeration():
    # standard rotated d=3: 4 weight-4 faces and 4 weight-2 boundary faces
    lat = build_lattice(LatticeSpec.square(3, Layout.ROTATED))
    weights = collections.Counter(len(s.support) for s in lat.stabilizers)
    assert weights == {4: 4, 2: 4}
    for sub in (Sublattice.PRIMAL, Sublattice.DUAL):
        assert len(lat.stabilizers_of(sub)) == 4


def test_every_qubit_has_both_sublattices():
    for layout in Layout:
        lat = build_lattice(LatticeSpec.square(5, layout))
        for q in range(lat.n_qubits):
            subs = {lat.pair_sublattice(q, "h"), lat.pair_sublattice(q, "v")}
            assert subs == {Sublattice.PRIMAL, Sublattice.DUAL}
            for pair in "hv":
                assert 1 <= len(lat.neighbours(q, pair)) <= 2


@pytest.mark.parametrize("bad", [(1, 3), (3, 1), (2.5, 3)])
def test_invalid_spec(bad):
    with pytest.raises(ValueError):
        LatticeSpec(*bad)


def test_displacements():
    lat = build_lattice(LatticeSpec.square(5))
    primal = lat.stabilizers_of(Sublattice.PRIMAL)
    a = primal[0]
    assert lat.stabilizer_displacement(a, a) == Displacement(0, 0)
    by_coord = {s.coord: s for s in primal}
    right = by_coord[(a.coord[0] + 1, a.coord[1])]
    assert lat.stabilizer_displacement(a, right) == Displacement(1, 0)
    s0, s1 = by_coord[(0, 0)], by_coord[(2, 3)]
    assert lat.stabilizer_displacement(s0, s1) == Displacement(2, 3)
    with pytest.raises(ValueError):
        lat.stabilizer_displacement(a, lat.stabilizers_of(Sublattice.DUAL)[0])


def _bfs_to_boundary(lat, site):
    """Hop count from ``site`` to the virtual boundary node on its detector graph."""
    g = lat.graphs[site.sublattice]
    adj = collections.defaultdict(set)
    for a, b in g.edge_nodes:
        adj[int(a)].add(int(b))
        adj[int(b)].add(int(a))
    start = g.local_index[site.id]
    dist = {start: 0}
    queue = collections.deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist[g.boundary]


@pytest.mark.parametrize("layout", list(Layout))
def test_boundary_distance_matches_graph_search(layout):
    lat = build_lattice(LatticeSpec.square(5, layout))
    for site in lat.stabilizers:
        assert lat.boundary_distance(site).length == _bfs_to_boundary(lat, site)


def test_boundary_distance_examples():
    lat = build_lattice(LatticeSpec.square(5))
    primal = lat.stabilizers_of(Sublattice.PRIMAL)
    # a cell touching its absorbing boundary is one step away
    edge = min(primal, key=lambda s: s.coord[0])
    assert lat.boundary_distance(edge) in (Displacement(1, 0), Displacement(0, 1))
    # d=5 has four primal columns, so a central cell sits two steps from either side
    center = next(s for s in primal if s.coord == (1, 2))
    options = lat.boundary_displacements(center)
    assert lat.boundary_distance(center) == Displacement(2, 0)
    assert sum(o == Displacement(2, 0) for o in options) == 1
    assert sum(o == Displacement(3, 0) for o in options) == 1
    small = build_lattice(LatticeSpec.square(2))
    assert all(small.boundary_distance(s).length == 1 for s in small.stabilizers)


def test_primal_boundaries_are_left_right():
    # primal defects are absorbed where the logical Z chain (a column) ends
    lat = build_lattice(LatticeSpec.square(3))
    rows = {lat.qubits[b.qubit].coord[1] for b in lat.boundary_sites[Sublattice.PRIMAL]}
    assert rows == {0, 4}
    cols = {lat.qubits[b.qubit].coord[0] for b in lat.boundary_sites[Sublattice.DUAL]}
    assert cols == {0, 4}


def test_matched_rectangle():
    assert matched_rectangle(5, 1) == LatticeSpec(5, 5)
    assert matched_rectangle(2, 1) == LatticeSpec(2, 2)
    spec = matched_rectangle(5, 3)
    count = planar_qubit_count(spec.d1, spec.d2)
    assert count <= 41
    # oracle: exhaustive search of widest rectangles per height within the budget
    cands = []
    for d2 in range(2, 16):
        fits = [d1 for d1 in range(2, 16) if planar_qubit_count(d1, d2) <= 41]
        if fits:
            cands.append((abs(math.log(max(fits) / d2) - math.log(3)), max(fits), d2))
    best = min(cands)
    assert (spec.d1, spec.d2) == (best[1], best[2])
    with pytest.raises(ValueError):
        matched_rectangle(1, 1)


def test_nn_pairs_share_a_vertex():
    lat = build_lattice(LatticeSpec.square(3))
    for a, b in lat.nn_pairs:
        ra, ca = lat.qubits[a].coord
        rb, cb = lat.qubits[b].coord
        assert abs(ra - rb) == 1 and abs(ca - cb) == 1
    degrees = np.bincount(np.ravel(lat.nn_pairs), minlength=lat.n_qubits)
    assert degrees.max() == 4
