"""Phase-free N-qubit Pauli operators in binary symplectic form.

X and Z parts are packed into Python integers (bit ``i`` is qubit ``i``); products
are XORs and symplectic products are popcounts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .codes import CodeLayout

# single-qubit letters as 2-bit codes: bit 0 = X part, bit 1 = Z part
I, X, Z, Y = 0, 1, 2, 3
LETTERS = "IXZY"
LETTER_CODE = {"I": I, "X": X, "Y": Y, "Z": Z}


def anticommute_codes(a, b):
    """Elementwise anticommutation indicator of single-qubit letter codes."""
    a = np.asarray(a)
    b = np.asarray(b)
    return ((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1))


@dataclass(frozen=True)
class PauliOperator:
    n: int
    x: int = 0
    z: int = 0

    @classmethod
    def identity(cls, n: int) -> PauliOperator:
        return cls(n)

    @classmethod
    def from_string(cls, text: str) -> PauliOperator:
        x = z = 0
        for i, ch in enumerate(text):
            code = LETTER_CODE[ch.upper()]
            if code & 1:
                x |= 1 << i
            if code & 2:
                z |= 1 << i
        return cls(len(text), x, z)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str | int) -> PauliOperator:
        code = LETTER_CODE[letter] if isinstance(letter, str) else int(letter)
        bit = 1 << qubit
        return cls(n, bit if code & 1 else 0, bit if code & 2 else 0)

    @classmethod
    def from_letters(cls, n: int, letters: dict[int, str | int]) -> PauliOperator:
        x = z = 0
        for q, letter in letters.items():
            code = LETTER_CODE[letter] if isinstance(letter, str) else int(letter)
            if code & 1:
                x |= 1 << q
            if code & 2:
                z |= 1 << q
        return cls(n, x, z)

    @classmethod
    def from_codes(cls, codes: Sequence[int] | np.ndarray) -> PauliOperator:
        codes = np.asarray(codes, dtype=np.uint8)
        x = _pack(codes & 1)
        z = _pack(codes >> 1)
        return cls(len(codes), x, z)

    def to_codes(self) -> np.ndarray:
        return (_unpack(self.x, self.n) | (_unpack(self.z, self.n) << 1)).astype(np.uint8)

    def letter(self, qubit: int) -> str:
        return LETTERS[((self.x >> qubit) & 1) | (((self.z >> qubit) & 1) << 1)]

    def __str__(self) -> str:
        return "".join(self.letter(i) for i in range(self.n))

    def __mul__(self, other: PauliOperator) -> PauliOperator:
        if other.n != self.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")
        return PauliOperator(self.n, self.x ^ other.x, self.z ^ other.z)

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    @property
    def support(self) -> list[int]:
        bits = self.x | self.z
        return [i for i in range(self.n) if (bits >> i) & 1]

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0


def compose(ops: Iterable[PauliOperator], n: int) -> PauliOperator:
    out = PauliOperator(n)
    for op in ops:
        out = out * op
    return out


def symplectic_product(a: PauliOperator, b: PauliOperator) -> int:
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} vs {b.n}")
    return ((a.x & b.z) ^ (a.z & b.x)).bit_count() & 1


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    return symplectic_product(a, b) == 0


def extract_syndrome(error: PauliOperator, code: CodeLayout) -> np.ndarray:
    """One bit per stabilizer (global id order): 1 where the error anticommutes."""
    if error.n != code.n_qubits:
        raise ValueError(f"error acts on {error.n} qubits, code has {code.n_qubits}")
    return np.fromiter(
        (symplectic_product(error, s) for s in code.stabilizer_ops),
        dtype=np.uint8,
        count=len(code.stabilizer_ops),
    )


@dataclass(frozen=True)
class LogicalPair:
    xbar: PauliOperator
    zbar: PauliOperator


class LogicalClass(str, enum.Enum):
    NONE = "none"
    XBAR_FLIP = "xbar_flip"
    ZBAR_FLIP = "zbar_flip"
    YBAR_FLIP = "ybar_flip"


def is_logical_failure(
    residual: PauliOperator, logicals: LogicalPair, code: CodeLayout
) -> LogicalClass:
    if extract_syndrome(residual, code).any():
        raise ValueError("residual has a nonzero syndrome")
    x_flip = not commutes(residual, logicals.zbar)
    z_flip = not commutes(residual, logicals.xbar)
    if x_flip and z_flip:
        return LogicalClass.YBAR_FLIP
    if x_flip:
        return LogicalClass.XBAR_FLIP
    if z_flip:
        return LogicalClass.ZBAR_FLIP
    return LogicalClass.NONE


def _pack(bits: np.ndarray) -> int:
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _unpack(value: int, n: int) -> np.ndarray:
    raw = value.to_bytes((n + 7) // 8 or 1, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n]
