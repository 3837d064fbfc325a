from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailored_qec.codes import (
    CodeFamily,
    CodeLayout,
    all_stabilizers_commute,
    build_code,
    build_css,
    build_from_letters,
    build_mhhm,
    build_mmhh,
    build_xxzz,
    build_xy,
    build_xzzx,
    derive_logicals,
    from_assignment,
    high_medium_letters,
    logical_masks,
    validate_consistency,
)
from tailored_qec.geometry import Layout, LatticeSpec, Sublattice, build_lattice
from tailored_qec.noise import make_gaussian, make_iid, make_toy_permutation
from tailored_qec.pauli import X, Y, Z, PauliOperator, commutes, extract_syndrome

LAT3 = build_lattice(LatticeSpec.square(3))


def _interior_qubit(lat):
    return next(q for q in range(lat.n_qubits) if len(lat.h_stabs[q]) == 2 and len(lat.v_stabs[q]) == 2)


def _defects(code, op):
    syn = extract_syndrome(op, code)
    subs = [code.lattice.stabilizers[s].sublattice for s in np.flatnonzero(syn)]
    return subs.count(Sublattice.PRIMAL), subs.count(Sublattice.DUAL)


def _all_codes(lat, seed=0):
    noise = make_gaussian(0.1, 0.5, 0.5, lat.n_qubits, seed=seed)
    codes = [build_css(lat), build_xy(lat), build_xzzx(lat), build_mhhm(lat, noise)]
    if lat.spec.layout is Layout.NON_ROTATED:
        codes += [build_xxzz(lat), build_mmhh(lat, noise)]
    return codes


def test_css_d3():
    code = build_css(LAT3)
    assert len(code.stabilizer_ops) == 12
    assert max(op.weight for op in code.stabilizer_ops) <= 4
    xbar, zbar = code.logicals.xbar, code.logicals.zbar
    assert str(xbar).replace("I", "") == "XXX"
    assert str(zbar).replace("I", "") == "ZZZ"
    rows = {LAT3.qubits[q].coord[0] for q in xbar.support}
    cols = {LAT3.qubits[q].coord[1] for q in zbar.support}
    assert len(rows) == 1 and len(cols) == 1  # X-bar horizontal, Z-bar vertical


def test_css_d2_commutes():
    code = build_css(build_lattice(LatticeSpec.square(2)))
    assert len(code.stabilizer_ops) == 4
    assert all_stabilizers_commute(code)


def test_css_defects():
    q = _interior_qubit(LAT3)
    code = build_css(LAT3)
    # plaquettes measure Z, so a Z error is seen only by the stars
    assert _defects(code, PauliOperator.single(13, q, "Z")) == (0, 2)
    assert _defects(code, PauliOperator.single(13, q, "X")) == (2, 0)


def test_xy_defects():
    code = build_xy(LAT3)
    q = _interior_qubit(LAT3)
    assert _defects(code, PauliOperator.single(13, q, "Z")) == (2, 2)
    assert _defects(code, PauliOperator.single(13, q, "X")) == (2, 0)
    assert validate_consistency(code)


def test_xzzx_single_z_hits_one_sublattice():
    code = build_xzzx(LAT3)
    assert all_stabilizers_commute(code)
    for q in range(LAT3.n_qubits):
        primal, dual = _defects(code, PauliOperator.single(13, q, "Z"))
        assert (primal == 0) != (dual == 0)


def test_xzzx_logicals_uniform_letters():
    code = build_xzzx(LAT3)
    for op in (code.logicals.xbar, code.logicals.zbar):
        letters = set(str(op).replace("I", ""))
        assert op.weight == 3 and len(letters) == 1


def test_xxzz_alternating_logical():
    code = build_xxzz(build_lattice(LatticeSpec.square(5)))
    assert validate_consistency(code)
    lat = code.lattice
    xbar = code.logicals.xbar
    support = sorted(xbar.support, key=lambda q: lat.qubits[q].coord)
    letters = [xbar.letter(q) for q in support]
    assert len({lat.qubits[q].coord[0] for q in support}) == 1
    assert all(a != b for a, b in zip(letters, letters[1:]))
    assert set(letters) == {"X", "Z"}
    with pytest.raises(ValueError):
        build_xxzz(build_lattice(LatticeSpec.square(3, Layout.ROTATED)))


def test_mhhm_uniform_noise_is_xzzx_pattern():
    # z > x > y everywhere: H = Z on the vertical pair, M = X on the horizontal pair
    noise = make_iid(0.1, bias=(0.3, 0.1, 0.6), n=LAT3.n_qubits)
    mhhm = build_mhhm(LAT3, noise)
    xzzx = build_xzzx(LAT3)
    swap = {X: Z, Z: X, Y: Y}
    assert np.array_equal(mhhm.v_letters, [swap[int(a)] for a in xzzx.v_letters])
    assert np.array_equal(mhhm.h_letters, [swap[int(a)] for a in xzzx.h_letters])
    assert (mhhm.v_letters == Z).all() and (mhhm.h_letters == X).all()


def test_tie_break_order():
    high, medium = high_medium_letters(np.array([[0.1, 0.1, 0.05], [0.2, 0.2, 0.2], [0.0, 0.3, 0.3]]))
    assert list(high) == [X, X, Y]
    assert list(medium) == [Y, Y, Z]


def test_mmhh_undoes_toy_permutation():
    lat = build_lattice(LatticeSpec.square(5))
    l, m, h = 0.01, 0.03, 0.06
    noise = make_toy_permutation(l, m, h, lat.n_qubits, seed=4)
    mmhh = build_mmhh(lat, noise)
    xxzz = build_xxzz(lat)
    rates = noise.rates
    for q in range(lat.n_qubits):
        # reference assignment is (x, y, z) = (m, l, h); map this qubit's letters back
        letter_of = {X: int(np.argmax(rates[q] == m)), Z: int(np.argmax(rates[q] == h))}
        back = {[X, Y, Z][letter_of[X]]: X, [X, Y, Z][letter_of[Z]]: Z}
        assert back[int(mmhh.v_letters[q])] == xxzz.v_letters[q]
        assert back[int(mmhh.h_letters[q])] == xxzz.h_letters[q]


def test_consistency_violation():
    code = build_css(LAT3)
    assert validate_consistency(code)
    q = _interior_qubit(LAT3)
    plaquette = next(s for s in LAT3.h_stabs[q] + LAT3.v_stabs[q] if LAT3.stabilizers[s].sublattice is Sublattice.PRIMAL)
    table = dict(code.assignment)
    table[(plaquette, q)] = "X"
    broken = from_assignment(LAT3, table)
    assert not validate_consistency(broken)
    assert broken.logicals is None


@pytest.mark.parametrize("layout", list(Layout))
@pytest.mark.parametrize("d", [2, 3, 4, 5, 7])
def test_every_family_consistent(layout, d):
    lat = build_lattice(LatticeSpec.square(d, layout))
    for code in _all_codes(lat, seed=d):
        assert validate_consistency(code)
        assert all_stabilizers_commute(code)
        xbar, zbar = code.logicals.xbar, code.logicals.zbar
        assert not commutes(xbar, zbar)
        for s in code.stabilizer_ops:
            assert commutes(s, xbar) and commutes(s, zbar)
        assert min(xbar.weight, zbar.weight) == d


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5), st.sampled_from(list(Layout)), st.integers(0, 2**32 - 1))
def test_random_consistent_deformations_commute(d, layout, seed):
    lat = build_lattice(LatticeSpec.square(d, layout))
    rng = np.random.default_rng(seed)
    v = rng.integers(1, 4, lat.n_qubits).astype(np.uint8)
    h = ((v + rng.integers(0, 2, lat.n_qubits)) % 3 + 1).astype(np.uint8)
    code = build_from_letters(lat, v, h)
    assert validate_consistency(code)
    assert all_stabilizers_commute(code)


def test_logical_masks_shared_by_deformations():
    lat = build_lattice(LatticeSpec.square(3))
    ref = logical_masks(build_css(lat))
    for code in _all_codes(lat):
        for a, b in zip(ref, logical_masks(code)):
            assert np.array_equal(a, b)


def test_json_round_trip():
    code = build_xzzx(LAT3)
    again = CodeLayout.from_json(code.to_json())
    assert again.stabilizer_ops == code.stabilizer_ops
    assert again.logicals == code.logicals


def test_derive_logicals_needs_full_rank():
    code = build_css(LAT3)
    crippled = CodeLayout(LAT3, code.family, code.assignment, code.stabilizer_ops[1:], None, code.v_letters, code.h_letters)
    with pytest.raises(ValueError):
        derive_logicals(crippled)


def test_build_code_dispatch():
    noise = make_iid(0.1, bias=(0.2, 0.1, 0.7), n=LAT3.n_qubits)
    assert build_code("MHHM", LAT3, noise).family is CodeFamily.MHHM
    with pytest.raises(ValueError):
        build_code("MMHH", LAT3)
