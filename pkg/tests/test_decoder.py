from __future__ import annotations

import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailored_qec.codes import build_css, build_mhhm, build_mmhh, build_xxzz, build_xy, build_xzzx
from tailored_qec.decoder import (
    BOUNDARY,
    BoundaryNode,
    MatchingDecoder,
    NoiseContext,
    WeightMetric,
    build_matching_graph,
    decode,
    dump_matching_graphs,
    edge_weight,
    sublattice_tables,
    weighted_manhattan_weights,
)
from tailored_qec.geometry import Layout, LatticeSpec, Sublattice, build_lattice
from tailored_qec.noise import PairChannel, PairKind, make_depolarizing_with_pairs, make_gaussian, make_iid
from tailored_qec.pauli import LogicalClass, PauliOperator, extract_syndrome, is_logical_failure

LAT7 = build_lattice(LatticeSpec.square(7))
CSS7 = build_css(LAT7)

METRICS = [
    WeightMetric.manhattan(),
    WeightMetric.weighted_manhattan(),
    WeightMetric.dijkstra(),
    WeightMetric.degeneracy(),
    WeightMetric.degeneracy_plus_correlation(),
]


def _cell(lattice, sub, coord):
    return next(s for s in lattice.stabilizers_of(sub) if s.coord == coord)


def test_manhattan_weight():
    a, b = _cell(LAT7, Sublattice.PRIMAL, (0, 0)), _cell(LAT7, Sublattice.PRIMAL, (2, 3))
    assert edge_weight(WeightMetric.manhattan(), a, b, CSS7) == 5
    assert edge_weight(WeightMetric.manhattan(), a, BoundaryNode(Sublattice.PRIMAL), CSS7) == 1


def test_degeneracy_weight_closed_form():
    a, b = _cell(LAT7, Sublattice.PRIMAL, (0, 0)), _cell(LAT7, Sublattice.PRIMAL, (1, 1))
    w = edge_weight(WeightMetric.degeneracy(p1=math.exp(-1)), a, b, CSS7)
    assert w == pytest.approx(2 - math.log(2))


def test_correlation_weight_odd_length_has_no_pair_term():
    a, b = _cell(LAT7, Sublattice.PRIMAL, (0, 0)), _cell(LAT7, Sublattice.PRIMAL, (1, 2))
    p1, p2 = 0.05, 0.2
    w = edge_weight(WeightMetric.degeneracy_plus_correlation(p1, p2), a, b, CSS7)
    assert w == pytest.approx(-math.log(math.comb(3, 1) * p1**3))
    c = _cell(LAT7, Sublattice.PRIMAL, (1, 1))
    even = edge_weight(WeightMetric.degeneracy_plus_correlation(p1, p2), a, c, CSS7)
    assert even == pytest.approx(-math.log(2 * p1**2 + p2))


def test_weighted_manhattan_weights():
    lat = build_lattice(LatticeSpec.square(5))
    noise = make_iid(0.1, bias=(0.2, 0.1, 0.7), n=lat.n_qubits)
    xzzx = build_xzzx(lat)
    wx, wz = weighted_manhattan_weights(NoiseContext.from_code(xzzx, noise))
    assert (wx, wz) == pytest.approx((-math.log(0.02), -math.log(0.07)))
    mhhm = build_mhhm(lat, noise)
    wx, wz = weighted_manhattan_weights(NoiseContext.from_code(mhhm, noise))
    assert (wx, wz) == pytest.approx((-math.log(0.07), -math.log(0.02)))


def test_dijkstra_on_uniform_css_is_scaled_manhattan():
    p = 0.09
    noise = make_iid(p, n=LAT7.n_qubits)
    a, b = _cell(LAT7, Sublattice.DUAL, (0, 0)), _cell(LAT7, Sublattice.DUAL, (3, 2))
    w = edge_weight(WeightMetric.dijkstra(), a, b, CSS7, noise)
    assert w == pytest.approx(5 * -math.log(2 * p / 3))


def test_metric_needs_noise():
    syn = np.zeros(len(CSS7.stabilizer_ops), dtype=np.uint8)
    with pytest.raises(ValueError):
        decode(syn, CSS7, WeightMetric.dijkstra())
    with pytest.raises(ValueError):
        WeightMetric.degeneracy(p1=1.5)


def _multigraph_counts(tables, side):
    """Shortest-path counts to one boundary side, parallel edges counted separately."""
    g = nx.Graph()
    g.add_nodes_from(range(tables.n))
    for q, (a, b) in enumerate(tables.graph.edge_nodes):
        a, b = int(a), int(b)
        if b == tables.boundary:
            if tables.edge_side[q] != side:
                continue
            b = "B"
        if g.has_edge(a, b):
            g[a][b]["m"] += 1
        else:
            g.add_edge(a, b, m=1)
    out = []
    for u in range(tables.n):
        if not nx.has_path(g, u, "B"):
            out.append((-1, 0))
            continue
        paths = list(nx.all_shortest_paths(g, u, "B"))
        count = sum(math.prod(g[x][y]["m"] for x, y in zip(p, p[1:])) for p in paths)
        out.append((len(paths[0]) - 1, count))
    return out


@pytest.mark.parametrize("layout", list(Layout))
@pytest.mark.parametrize("sub", list(Sublattice))
def test_boundary_path_counts(layout, sub):
    lat = build_lattice(LatticeSpec.square(5, layout))
    t = sublattice_tables(lat, sub)
    for side in (0, 1):
        expect = _multigraph_counts(t, side)
        assert [int(x) for x in t.side_length[side]] == [e[0] for e in expect]
        assert [int(x) for x in t.side_paths[side]] == [e[1] for e in expect]


def test_interior_path_counts_are_binomial():
    t = sublattice_tables(LAT7, Sublattice.PRIMAL)
    g = nx.Graph()
    for a, b in t.graph.edge_nodes:
        if b != t.boundary:
            g.add_edge(int(a), int(b))
    rng = np.random.default_rng(1)
    for _ in range(30):
        u, v = rng.choice(t.n, 2, replace=False)
        count = sum(1 for _ in nx.all_shortest_paths(g, u, v))
        lx, lz = t.lx[u, v], t.lz[u, v]
        assert count == math.comb(lx + lz, lx)


def test_empty_and_single_defect_graphs():
    syn = np.zeros(len(CSS7.stabilizer_ops), dtype=np.uint8)
    graphs = build_matching_graph(syn, CSS7, WeightMetric.manhattan())
    assert all(g.n_nodes == 0 for g, _ in graphs.values())
    syn[_cell(LAT7, Sublattice.PRIMAL, (2, 3)).id] = 1
    dec = MatchingDecoder(LAT7, WeightMetric.manhattan())
    parts = dec.split_syndrome(syn)
    assert dec.matched_pairs(Sublattice.PRIMAL, parts[Sublattice.PRIMAL]) == [(BOUNDARY, _cell(LAT7, Sublattice.PRIMAL, (2, 3)).id)]
    assert "# sublattice primal" in dump_matching_graphs(syn, CSS7, WeightMetric.manhattan())


def test_two_defects_pair_or_boundary():
    # oracle: compare the two possible perfect matchings by hand
    sub = Sublattice.PRIMAL
    cells = LAT7.stabilizers_of(sub)
    dec = MatchingDecoder(LAT7, WeightMetric.manhattan())
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(200):
        a, b = rng.choice(len(cells), 2, replace=False)
        a, b = cells[a], cells[b]
        direct = LAT7.stabilizer_displacement(a, b).length
        via = LAT7.boundary_distance(a).length + LAT7.boundary_distance(b).length
        if direct == via:
            continue
        syn = np.zeros(len(CSS7.stabilizer_ops), dtype=np.uint8)
        syn[[a.id, b.id]] = 1
        pairs = dec.matched_pairs(sub, dec.split_syndrome(syn)[sub])
        assert (pairs == [tuple(sorted((a.id, b.id)))]) == (direct < via)
        checked += 1
    assert checked > 100


def _codes3(layout):
    lat = build_lattice(LatticeSpec.square(3, layout))
    # mild disorder: with strong disorder a weight-2 chain through noisy qubits can
    # legitimately outweigh a weight-1 chain under rate-aware metrics
    noise = make_gaussian(0.1, 0.1, 0.1, lat.n_qubits, seed=3)
    codes = [build_css(lat), build_xy(lat), build_xzzx(lat), build_mhhm(lat, noise)]
    if layout is Layout.NON_ROTATED:
        codes += [build_xxzz(lat), build_mmhh(lat, noise)]
    return codes, noise.with_pairs(PairChannel(PairKind.XZ, 0.02))


@pytest.mark.parametrize("layout", list(Layout))
@pytest.mark.parametrize("metric", METRICS, ids=lambda m: m.name)
def test_weight_one_errors_are_corrected(layout, metric):
    codes, noise = _codes3(layout)
    for code in codes:
        n = code.n_qubits
        for q in range(n):
            for letter in "XYZ":
                err = PauliOperator.single(n, q, letter)
                syn = extract_syndrome(err, code)
                corr = decode(syn, code, metric, noise).op
                residual = err * corr
                assert is_logical_failure(residual, code.logicals, code) is LogicalClass.NONE, (code.family, q, letter)


def test_identity_error_identity_correction():
    syn = np.zeros(len(CSS7.stabilizer_ops), dtype=np.uint8)
    for metric in METRICS:
        corr = decode(syn, CSS7, metric, make_iid(0.1, n=LAT7.n_qubits))
        assert corr.op.is_identity() and corr.matched_pairs == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(METRICS), st.sampled_from(list(Layout)))
def test_correction_reproduces_syndrome(seed, metric, layout):
    lat = build_lattice(LatticeSpec.square(5, layout))
    code = build_xzzx(lat)
    noise = make_depolarizing_with_pairs(0.15, lat.n_qubits)
    rng = np.random.default_rng(seed)
    codes = rng.choice(4, size=lat.n_qubits, p=[0.8, 0.07, 0.07, 0.06]).astype(np.uint8)
    err = PauliOperator.from_codes(codes)
    syn = extract_syndrome(err, code)
    corr = decode(syn, code, metric, noise)
    assert np.array_equal(extract_syndrome(corr.op, code), syn)


def test_batch_decoding_matches_single_rows():
    lat = build_lattice(LatticeSpec.square(5, Layout.ROTATED))
    code = build_xzzx(lat)
    ctx = NoiseContext.from_code(code, make_depolarizing_with_pairs(0.1, lat.n_qubits))
    dec = MatchingDecoder(lat, WeightMetric.degeneracy_plus_correlation())
    t = dec.tables[Sublattice.DUAL]
    rng = np.random.default_rng(2)
    syn = (rng.random((40, t.n)) < 0.2).astype(np.uint8)
    batch = dec.decode_syndromes(Sublattice.DUAL, syn, ctx)
    for k in range(len(syn)):
        assert np.array_equal(batch[k], dec.decode_syndromes(Sublattice.DUAL, syn[k : k + 1], ctx)[0])
        assert np.array_equal((t.check_matrix @ batch[k]) % 2, syn[k])
