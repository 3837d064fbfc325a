"""Clifford-deformed surface codes.

A consistent deformation is described per qubit by two distinct letters: ``v`` is
measured by the qubit's vertical neighbour pair of stabilizers and ``h`` by its
horizontal pair (see :mod:`tailored_qec.geometry` for the rotated analogue).
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .geometry import Lattice, LatticeSpec, Layout, build_lattice
from .pauli import LETTER_CODE, LETTERS, X, Y, Z, LogicalPair, PauliOperator, commutes

# rate column index (x, y, z) -> letter code
RATE_COLUMN_LETTER = np.array([X, Y, Z], dtype=np.uint8)


class CodeFamily(str, enum.Enum):
    CSS = "CSS"
    XY = "XY"
    XZZX = "XZZX"
    XXZZ = "XXZZ"
    MHHM = "MHHM"
    MMHH = "MMHH"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class CodeLayout:
    lattice: Lattice
    family: CodeFamily
    assignment: dict[tuple[int, int], str]
    stabilizer_ops: tuple[PauliOperator, ...]
    logicals: LogicalPair | None
    v_letters: np.ndarray | None = None
    h_letters: np.ndarray | None = None

    @property
    def n_qubits(self) -> int:
        return self.lattice.n_qubits

    @property
    def spec(self) -> LatticeSpec:
        return self.lattice.spec

    def letter(self, stabilizer: int, qubit: int) -> str:
        return self.assignment[(stabilizer, qubit)]

    def to_json(self) -> str:
        spec = self.spec
        doc: dict[str, Any] = {
            "lattice": {"d1": spec.d1, "d2": spec.d2, "layout": spec.layout.value},
            "family": self.family.value,
            "assignment": [[s, q, a] for (s, q), a in sorted(self.assignment.items())],
        }
        if self.logicals is not None:
            doc["logicals"] = {"xbar": str(self.logicals.xbar), "zbar": str(self.logicals.zbar)}
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> CodeLayout:
        doc = json.loads(text)
        lat = doc["lattice"]
        lattice = build_lattice(LatticeSpec(lat["d1"], lat["d2"], Layout(lat["layout"])))
        assignment = {(int(s), int(q)): str(a) for s, q, a in doc["assignment"]}
        logicals = None
        if "logicals" in doc:
            logicals = LogicalPair(
                PauliOperator.from_string(doc["logicals"]["xbar"]),
                PauliOperator.from_string(doc["logicals"]["zbar"]),
            )
        return from_assignment(
            lattice, assignment, family=CodeFamily(doc["family"]), logicals=logicals
        )


# letter patterns -------------------------------------------------------------


def css_letters(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Primal cells measure Z, dual cells X."""
    v = np.where(lattice.v_sublattice, Z, X).astype(np.uint8)
    h = np.where(lattice.h_sublattice, Z, X).astype(np.uint8)
    return v, h


def xy_letters(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    v = np.where(lattice.v_sublattice, Y, X).astype(np.uint8)
    h = np.where(lattice.h_sublattice, Y, X).astype(np.uint8)
    return v, h


def xzzx_letters(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    n = lattice.n_qubits
    return np.full(n, X, dtype=np.uint8), np.full(n, Z, dtype=np.uint8)


def xxzz_swap_mask(lattice: Lattice) -> np.ndarray:
    """Qubits whose CSS letters are interchanged to obtain the XXZZ code.

    Cells are indexed by ``(row // 2, col // 2)`` on their own sub-lattice. Swapping
    on this checkerboard of qubits leaves the cells with even index sum CSS-like and
    interchanges X and Z on every other cell.
    """
    if lattice.spec.layout is not Layout.NON_ROTATED:
        raise ValueError("the XXZZ pattern is defined for the non-rotated layout only")
    mask = np.zeros(lattice.n_qubits, dtype=bool)
    for q in lattice.qubits:
        r, c = q.coord
        mask[q.id] = ((r // 2) + (c // 2)) % 2 == 1
    return mask


def xxzz_letters(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    v, h = css_letters(lattice)
    swap = xxzz_swap_mask(lattice)
    return np.where(swap, h, v).astype(np.uint8), np.where(swap, v, h).astype(np.uint8)


def high_medium_letters(rates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-qubit letters of the highest and second-highest rate.

    ``rates`` has columns (x, y, z). Ties are broken in the order X < Y < Z.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 2 or rates.shape[1] != 3:
        raise ValueError("rates must have shape (N, 3)")
    if (rates < 0).any():
        raise ValueError("noise rates must be nonnegative")
    order = np.argsort(-rates, axis=1, kind="stable")
    return RATE_COLUMN_LETTER[order[:, 0]], RATE_COLUMN_LETTER[order[:, 1]]


def mhhm_letters(lattice: Lattice, rates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """H on north/south (the v pair), M on east/west (the h pair)."""
    high, medium = high_medium_letters(_check_rates(lattice, rates))
    return high, medium


def mmhh_letters(lattice: Lattice, rates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """XXZZ pattern with X replaced by M and Z by H on every qubit."""
    high, medium = high_medium_letters(_check_rates(lattice, rates))
    v, h = xxzz_letters(lattice)
    return np.where(v == X, medium, high), np.where(h == X, medium, high)


def family_letters(
    family: CodeFamily | str, lattice: Lattice, rates: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    family = CodeFamily(family)
    if family is CodeFamily.CSS:
        return css_letters(lattice)
    if family is CodeFamily.XY:
        return xy_letters(lattice)
    if family is CodeFamily.XZZX:
        return xzzx_letters(lattice)
    if family is CodeFamily.XXZZ:
        return xxzz_letters(lattice)
    if rates is None:
        raise ValueError(f"{family.value} needs per-qubit noise rates")
    if family is CodeFamily.MHHM:
        return mhhm_letters(lattice, rates)
    if family is CodeFamily.MMHH:
        return mmhh_letters(lattice, rates)
    raise ValueError(f"no fixed letter pattern for family {family.value}")


def _check_rates(lattice: Lattice, rates) -> np.ndarray:
    rates = getattr(rates, "rates", rates)
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (lattice.n_qubits, 3):
        raise ValueError(f"expected rates of shape ({lattice.n_qubits}, 3), got {rates.shape}")
    return rates


# builders ------------------------------------------------------------------------


def build_from_letters(
    lattice: Lattice,
    v_letters: np.ndarray,
    h_letters: np.ndarray,
    family: CodeFamily | str = CodeFamily.CUSTOM,
    logicals: LogicalPair | None = None,
) -> CodeLayout:
    v_letters = np.asarray(v_letters, dtype=np.uint8)
    h_letters = np.asarray(h_letters, dtype=np.uint8)
    n = lattice.n_qubits
    if v_letters.shape != (n,) or h_letters.shape != (n,):
        raise ValueError("need one v and one h letter per qubit")
    if ((v_letters == 0) | (h_letters == 0) | (v_letters > 3) | (h_letters > 3)).any():
        raise ValueError("letters must be X, Y or Z")
    if (v_letters == h_letters).any():
        raise ValueError("v and h letters must differ on every qubit")
    assignment: dict[tuple[int, int], str] = {}
    for q in range(n):
        for s in lattice.v_stabs[q]:
            assignment[(s, q)] = LETTERS[v_letters[q]]
        for s in lattice.h_stabs[q]:
            assignment[(s, q)] = LETTERS[h_letters[q]]
    return from_assignment(lattice, assignment, family=family, logicals=logicals)


def from_assignment(
    lattice: Lattice,
    assignment: dict[tuple[int, int], str],
    family: CodeFamily | str = CodeFamily.CUSTOM,
    logicals: LogicalPair | None = None,
) -> CodeLayout:
    """Build a layout from an explicit (stabilizer, qubit) -> letter table.

    The table may describe an inconsistent deformation; in that case the per-qubit
    letter arrays are left unset and no logicals are derived.
    """
    n = lattice.n_qubits
    ops = []
    for stab in lattice.stabilizers:
        letters = {}
        for q in stab.support:
            letter = assignment.get((stab.id, q))
            if letter not in ("X", "Y", "Z"):
                raise ValueError(f"missing or invalid letter for stabilizer {stab.id}, qubit {q}")
            letters[q] = letter
        ops.append(PauliOperator.from_letters(n, letters))
    code = CodeLayout(lattice, CodeFamily(family), dict(assignment), tuple(ops), None)
    letters = _per_qubit_letters(code)
    if letters is None:
        return code
    v, h = letters
    code = CodeLayout(code.lattice, code.family, code.assignment, code.stabilizer_ops, None, v, h)
    if logicals is None:
        logicals = derive_logicals(code)
    return CodeLayout(
        code.lattice, code.family, code.assignment, code.stabilizer_ops, logicals, v, h
    )


def build_css(lattice: Lattice) -> CodeLayout:
    return build_from_letters(lattice, *css_letters(lattice), family=CodeFamily.CSS)


def build_xy(lattice: Lattice) -> CodeLayout:
    return build_from_letters(lattice, *xy_letters(lattice), family=CodeFamily.XY)


def build_xzzx(lattice: Lattice) -> CodeLayout:
    return build_from_letters(lattice, *xzzx_letters(lattice), family=CodeFamily.XZZX)


def build_xxzz(lattice: Lattice) -> CodeLayout:
    return build_from_letters(lattice, *xxzz_letters(lattice), family=CodeFamily.XXZZ)


def build_mhhm(lattice: Lattice, noise) -> CodeLayout:
    return build_from_letters(lattice, *mhhm_letters(lattice, noise), family=CodeFamily.MHHM)


def build_mmhh(lattice: Lattice, noise) -> CodeLayout:
    return build_from_letters(lattice, *mmhh_letters(lattice, noise), family=CodeFamily.MMHH)


def build_code(family: CodeFamily | str, lattice: Lattice, noise=None) -> CodeLayout:
    family = CodeFamily(family)
    rates = None if noise is None else getattr(noise, "rates", noise)
    return build_from_letters(lattice, *family_letters(family, lattice, rates), family=family)


# consistency ---------------------------------------------------------------------


def _per_qubit_letters(code: CodeLayout) -> tuple[np.ndarray, np.ndarray] | None:
    lattice = code.lattice
    n = lattice.n_qubits
    v = np.zeros(n, dtype=np.uint8)
    h = np.zeros(n, dtype=np.uint8)
    for q in range(n):
        vs = {code.assignment[(s, q)] for s in lattice.v_stabs[q]}
        hs = {code.assignment[(s, q)] for s in lattice.h_stabs[q]}
        if len(vs) != 1 or len(hs) != 1 or vs == hs:
            return None
        v[q] = LETTER_CODE[vs.pop()]
        h[q] = LETTER_CODE[hs.pop()]
    return v, h


def validate_consistency(code: CodeLayout) -> bool:
    """Both vertical neighbours agree, both horizontal neighbours agree, and the two differ."""
    return _per_qubit_letters(code) is not None


def all_stabilizers_commute(code: CodeLayout) -> bool:
    ops = code.stabilizer_ops
    return all(commutes(a, b) for a, b in itertools.combinations(ops, 2))


# logical operators -----------------------------------------------------------------


class _GF2Basis:
    """Incremental row-echelon basis of GF(2) vectors stored as Python ints."""

    def __init__(self):
        self.pivots: dict[int, int] = {}

    def reduce(self, vec: int) -> int:
        while vec:
            top = vec.bit_length() - 1
            row = self.pivots.get(top)
            if row is None:
                return vec
            vec ^= row
        return 0

    def add(self, vec: int) -> bool:
        vec = self.reduce(vec)
        if vec == 0:
            return False
        self.pivots[vec.bit_length() - 1] = vec
        return True

    @property
    def rank(self) -> int:
        return len(self.pivots)


def _nullspace(rows: list[int], n_vars: int) -> list[int]:
    """Basis of {u : popcount(u & r) even for every r in rows}."""
    pivot_rows: list[tuple[int, int]] = []  # (pivot column, row) in reduced form
    for r in rows:
        for col, prow in pivot_rows:
            if (r >> col) & 1:
                r ^= prow
        if r == 0:
            continue
        col = r.bit_length() - 1
        pivot_rows = [(c, pr ^ r if (pr >> col) & 1 else pr) for c, pr in pivot_rows]
        pivot_rows.append((col, r))
    pivot_cols = {c for c, _ in pivot_rows}
    basis = []
    for free in range(n_vars):
        if free in pivot_cols:
            continue
        u = 1 << free
        for col, prow in pivot_rows:
            if (prow >> free) & 1:
                u |= 1 << col
        basis.append(u)
    return basis


def _symplectic(op: PauliOperator) -> int:
    return op.x | (op.z << op.n)


def _swapped(op: PauliOperator) -> int:
    return op.z | (op.x << op.n)


def _from_symplectic(vec: int, n: int) -> PauliOperator:
    mask = (1 << n) - 1
    return PauliOperator(n, vec & mask, vec >> n)


def _line_logicals(code: CodeLayout, line: list[int], stab_basis: _GF2Basis) -> list[PauliOperator]:
    """Normalizer elements supported on ``line`` that are not stabilizers, lightest first."""
    n = code.n_qubits
    k = len(line)
    line_set = set(line)
    rows = []
    for stab, op in zip(code.lattice.stabilizers, code.stabilizer_ops):
        if not line_set.intersection(stab.support):
            continue
        r = 0
        for j, q in enumerate(line):
            if (op.z >> q) & 1:
                r |= 1 << j  # x-variable of qubit q
            if (op.x >> q) & 1:
                r |= 1 << (k + j)  # z-variable of qubit q
        rows.append(r)
    null = _nullspace(rows, 2 * k)
    if not null or len(null) > 12:
        return []
    found = []
    for combo in range(1, 1 << len(null)):
        u = 0
        for b, vec in enumerate(null):
            if (combo >> b) & 1:
                u ^= vec
        x = z = 0
        for j, q in enumerate(line):
            if (u >> j) & 1:
                x |= 1 << q
            if (u >> (k + j)) & 1:
                z |= 1 << q
        op = PauliOperator(n, x, z)
        if stab_basis.reduce(_symplectic(op)):
            found.append(op)
    found.sort(key=lambda o: (o.weight, o.x | o.z, o.x))
    return found


def derive_logicals(code: CodeLayout) -> LogicalPair:
    """A mutually anticommuting pair outside the stabilizer group.

    Row and column lines are tried first so the usual weight-``d`` chains come out;
    a general symplectic search is the fallback. ``xbar`` lies along a row.
    """
    n = code.n_qubits
    stab_basis = _GF2Basis()
    for op in code.stabilizer_ops:
        stab_basis.add(_symplectic(op))
    if stab_basis.rank != n - 1:
        raise ValueError(f"stabilizer rank {stab_basis.rank} != N - 1 = {n - 1}")
    lattice = code.lattice
    row_cands = [op for line in lattice.row_lines for op in _line_logicals(code, line, stab_basis)[:1]]
    col_cands = [op for line in lattice.col_lines for op in _line_logicals(code, line, stab_basis)[:1]]
    row_cands.sort(key=lambda o: o.weight)
    col_cands.sort(key=lambda o: o.weight)
    for xbar in row_cands:
        for zbar in col_cands:
            if not commutes(xbar, zbar):
                return LogicalPair(xbar, zbar)
    return _generic_logicals(code, stab_basis)


def _generic_logicals(code: CodeLayout, stab_basis: _GF2Basis) -> LogicalPair:
    n = code.n_qubits
    normalizer = _nullspace([_swapped(op) for op in code.stabilizer_ops], 2 * n)
    reps = []
    basis = _GF2Basis()
    basis.pivots = dict(stab_basis.pivots)
    for vec in normalizer:
        if basis.add(vec):
            reps.append(_from_symplectic(vec, n))
    for a, b in itertools.combinations(reps, 2):
        if not commutes(a, b):
            return LogicalPair(a, b)
    raise ValueError("could not find anticommuting logical operators")


def logical_masks(code: CodeLayout) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Decompose each logical per qubit into its v and h letter components.

    Returns ``(xbar_v, xbar_h, zbar_v, zbar_h)`` boolean masks: on qubit ``i`` the
    logical letter is ``v_i^a * h_i^b`` with ``a = mask_v[i]``, ``b = mask_h[i]``.
    A residual anticommutes with the logical iff the parity of
    ``mask_v & flips_v ^ mask_h & flips_h`` is odd, where ``flips_v`` marks residual
    letters anticommuting with ``v_i``. The masks are identical for every consistent
    deformation of the same lattice.
    """
    if code.v_letters is None or code.logicals is None:
        raise ValueError("logical masks need a consistent layout")
    out = []
    for op in (code.logicals.xbar, code.logicals.zbar):
        letters = op.to_codes()
        a = np.zeros(code.n_qubits, dtype=bool)
        b = np.zeros(code.n_qubits, dtype=bool)
        for q in np.flatnonzero(letters):
            for av, bh in ((1, 0), (0, 1), (1, 1)):
                combo = (code.v_letters[q] if av else 0) ^ (code.h_letters[q] if bh else 0)
                if combo == letters[q]:
                    a[q], b[q] = bool(av), bool(bh)
                    break
        out += [a, b]
    return tuple(out)
