"""Pauli noise models and error sampling.

Rates are held as an ``(N, 3)`` array with columns ``(x, y, z)``. Sampled errors
are arrays of letter codes (see :mod:`tailored_qec.pauli`) so that whole batches
of trials can be drawn at once.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, replace

import numpy as np

from .pauli import X, Y, Z, PauliOperator, anticommute_codes

RATE_LETTERS = np.array([X, Y, Z], dtype=np.uint8)


class NoiseKind(str, enum.Enum):
    IID = "iid"
    TOY = "toy"
    GAUSSIAN = "gaussian"


class PairKind(str, enum.Enum):
    XX_ZZ = "XX_ZZ"
    XZ = "XZ"


@dataclass(frozen=True)
class QubitRates:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if min(self.x, self.y, self.z) < 0:
            raise ValueError("rates must be nonnegative")
        if self.x + self.y + self.z > 1 + 1e-12:
            raise ValueError("rates must sum to at most 1")

    @property
    def p(self) -> float:
        return self.x + self.y + self.z

    @property
    def bias(self) -> float:
        return self.z / self.x if self.x > 0 else float("inf")


@dataclass(frozen=True)
class PairChannel:
    kind: PairKind
    p2: float
    pxx: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", PairKind(self.kind))
        if not 0 <= self.p2 <= 1:
            raise ValueError("p2 must be a probability")
        if not 0 <= self.pxx <= 1:
            raise ValueError("pxx must be a probability")

    @property
    def pzz(self) -> float:
        return 1.0 - self.pxx


@dataclass(frozen=True)
class NoiseDescriptor:
    kind: NoiseKind
    p: float
    sigma_p: float = 0.0
    sigma_tot: float = 0.0
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class NoiseModel:
    rates: np.ndarray  # (N, 3) columns x, y, z
    descriptor: NoiseDescriptor
    pair_channel: PairChannel | None = None

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        if rates.ndim != 2 or rates.shape[1] != 3:
            raise ValueError("rates must have shape (N, 3)")
        if (rates < 0).any() or (rates.sum(axis=1) > 1 + 1e-12).any():
            raise ValueError("every qubit needs nonnegative rates summing to at most 1")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @property
    def n_qubits(self) -> int:
        return len(self.rates)

    @property
    def per_qubit(self) -> list[QubitRates]:
        return [QubitRates(*map(float, r)) for r in self.rates]

    def with_pairs(self, channel: PairChannel | None) -> NoiseModel:
        return NoiseModel(self.rates, self.descriptor, channel)

    def to_dict(self) -> dict:
        d = self.descriptor
        out = {
            "kind": d.kind.value,
            "p": d.p,
            "sigma_p": d.sigma_p,
            "sigma_tot": d.sigma_tot,
            "seed": d.seed,
            "pair_kind": None,
            "p2": 0.0,
            "pxx": None,
        }
        if self.pair_channel is not None:
            out["pair_kind"] = self.pair_channel.kind.value
            out["p2"] = self.pair_channel.p2
            out["pxx"] = self.pair_channel.pxx
        return out


# constructors -------------------------------------------------------------------


def make_iid(p: float, bias=(1 / 3, 1 / 3, 1 / 3), n: int = 1) -> NoiseModel:
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    bias = np.asarray(bias, dtype=float)
    if bias.shape != (3,) or (bias < 0).any() or not np.isclose(bias.sum(), 1.0):
        raise ValueError("bias must be three nonnegative weights summing to 1")
    rates = np.tile(p * bias, (n, 1))
    return NoiseModel(rates, NoiseDescriptor(NoiseKind.IID, p))


def toy_permutation_rates(l: float, m: float, h: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Per-qubit random permutations of the reference assignment (x, y, z) = (m, l, h)."""
    base = np.array([m, l, h], dtype=float)
    perms = np.argsort(rng.random((n, 3)), axis=1)
    return base[perms]


def make_toy_permutation(l: float, m: float, h: float, n: int, seed=None) -> NoiseModel:
    if not (0 <= l <= m <= h):
        raise ValueError("need 0 <= l <= m <= h")
    if l + m + h > 1:
        raise ValueError("l + m + h must not exceed 1")
    rng = np.random.default_rng(seed)
    rates = toy_permutation_rates(l, m, h, n, rng)
    return NoiseModel(rates, NoiseDescriptor(NoiseKind.TOY, l + m + h, seed=_seed_value(seed)))


def truncated_normal(
    rng: np.random.Generator, mean, scale, size, low: float = 0.0, high: float = 1.0
) -> np.ndarray:
    """Normal draws restricted to ``[low, high]`` by resampling out-of-range values."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), size)
    scale = np.broadcast_to(np.asarray(scale, dtype=float), size)
    out = rng.normal(mean, scale)
    bad = (out < low) | (out > high)
    while bad.any():
        out[bad] = rng.normal(mean[bad], scale[bad])
        bad = (out < low) | (out > high)
    return out


def gaussian_rates(
    p: float, sigma_p: float, sigma_tot: float, shape, rng: np.random.Generator
) -> np.ndarray:
    """Rates of shape ``shape + (3,)``.

    Pauli mix weights ``~ N(0.5, sigma_p)`` and total rates ``~ N(p, p * sigma_tot)``,
    both truncated to [0, 1]; the mix is normalized and scaled by the total.
    """
    shape = tuple(np.atleast_1d(shape))
    if sigma_p > 0:
        mix = truncated_normal(rng, 0.5, sigma_p, shape + (3,))
        # all three weights at exactly zero has probability zero but guard anyway
        total = mix.sum(axis=-1, keepdims=True)
        mix = np.where(total > 0, mix / np.where(total > 0, total, 1.0), 1 / 3)
    else:
        mix = np.full(shape + (3,), 1 / 3)
    if sigma_tot > 0:
        ptot = truncated_normal(rng, p, p * sigma_tot, shape)
    else:
        ptot = np.full(shape, float(p))
    return mix * ptot[..., None]


def make_gaussian(p: float, sigma_p: float, sigma_tot: float, n: int, seed=None) -> NoiseModel:
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    if sigma_p < 0 or sigma_tot < 0:
        raise ValueError("sigmas must be nonnegative")
    if p == 0 and sigma_tot > 0:
        raise ValueError("p = 0 with sigma_tot > 0 has a degenerate scale")
    rng = np.random.default_rng(seed)
    rates = gaussian_rates(p, sigma_p, sigma_tot, n, rng)
    desc = NoiseDescriptor(NoiseKind.GAUSSIAN, p, sigma_p, sigma_tot, _seed_value(seed))
    return NoiseModel(rates, desc)


def make_depolarizing_with_pairs(
    p: float,
    n: int,
    p1_fraction: float = 0.25,
    pair_kind: PairKind | str = PairKind.XZ,
    neighbours: int = 4,
    pxx: float = 0.5,
) -> NoiseModel:
    """Single-qubit depolarizing at ``p1 = p1_fraction * p`` plus nearest-neighbour pairs.

    The per-edge pair probability is ``(p - p1) / neighbours``, so that an interior
    qubit with ``neighbours`` nearest neighbours is touched by ``p`` errors on average.
    """
    p1 = p1_fraction * p
    p2 = (p - p1) / neighbours
    model = make_iid(p1, n=n)
    return NoiseModel(
        model.rates, NoiseDescriptor(NoiseKind.IID, p), PairChannel(PairKind(pair_kind), p2, pxx)
    )


def _seed_value(seed) -> int | None:
    return int(seed) if isinstance(seed, (int, np.integer)) else None


# sampling ------------------------------------------------------------------------


def sample_single_qubit(rates: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Letter codes of shape ``(shots, N)``.

    ``rates`` is ``(N, 3)`` or per-shot ``(shots, N, 3)``.
    """
    rates = np.asarray(rates, dtype=float)
    n = rates.shape[-2]
    u = rng.random((shots, n))
    cx = rates[..., 0]
    cy = cx + rates[..., 1]
    cz = cy + rates[..., 2]
    out = np.zeros((shots, n), dtype=np.uint8)
    out[u < cz] = Z
    out[u < cy] = Y
    out[u < cx] = X
    return out


def sample_pairs(
    channel: PairChannel, pairs: np.ndarray, n: int, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Correlated two-qubit errors, one independent event per unordered edge."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.zeros((shots, n), dtype=np.uint8)
    if channel.p2 == 0 or len(pairs) == 0:
        return out
    hit = rng.random((shots, len(pairs))) < channel.p2
    choice = rng.random((shots, len(pairs)))
    if channel.kind is PairKind.XX_ZZ:
        letter = np.where(choice < channel.pxx, X, Z).astype(np.uint8)
        first, second = letter, letter
    else:
        xz = choice < 0.5
        first = np.where(xz, X, Z).astype(np.uint8)
        second = np.where(xz, Z, X).astype(np.uint8)
    first = np.where(hit, first, 0).astype(np.uint8)
    second = np.where(hit, second, 0).astype(np.uint8)
    # several edges may share a qubit, so accumulate with XOR one edge column at a time
    for k, (a, b) in enumerate(pairs):
        out[:, a] ^= first[:, k]
        out[:, b] ^= second[:, k]
    return out


def sample_errors(
    model: NoiseModel, pairs: np.ndarray | None, shots: int, rng: np.random.Generator
) -> np.ndarray:
    errs = sample_single_qubit(model.rates, shots, rng)
    if model.pair_channel is not None:
        if pairs is None:
            raise ValueError("pair channel needs the nearest-neighbour edge list")
        errs ^= sample_pairs(model.pair_channel, pairs, model.n_qubits, shots, rng)
    return errs


@dataclass(frozen=True)
class ErrorSample:
    op: PauliOperator
    trial_seed: int


def trial_generator(trial_seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one trial and stream."""
    ss = np.random.SeedSequence(int(trial_seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def sample_error(model: NoiseModel, lattice, trial_seed: int) -> ErrorSample:
    if model.n_qubits != lattice.n_qubits:
        raise ValueError("noise model and lattice disagree on the qubit count")
    rng = trial_generator(trial_seed)
    codes = sample_errors(model, np.asarray(lattice.nn_pairs), 1, rng)[0]
    return ErrorSample(PauliOperator.from_codes(codes), int(trial_seed))


# sub-lattice flip rates -------------------------------------------------------------


def flip_probabilities(rates: np.ndarray, letters: np.ndarray) -> np.ndarray:
    """Probability that a single-qubit error anticommutes with ``letters`` per qubit.

    Works for ``rates`` of shape ``(..., N, 3)`` and ``letters`` of shape ``(..., N)``.
    """
    rates = np.asarray(rates, dtype=float)
    letters = np.asarray(letters)
    out = np.zeros(np.broadcast_shapes(rates.shape[:-1], letters.shape))
    for k, code in enumerate(RATE_LETTERS):
        out = out + rates[..., k] * anticommute_codes(code, letters)
    return out


def sublattice_flip_probability(model: NoiseModel, qubit: int, code, sublattice) -> float:
    """Rate of single-qubit errors on ``qubit`` that flip checks of ``sublattice``."""
    lattice = code.lattice
    pair = lattice.pair_in(qubit, sublattice)
    letter = code.v_letters[qubit] if pair == "v" else code.h_letters[qubit]
    return float(flip_probabilities(model.rates[qubit], np.uint8(letter)))


# per-trial noise recipes -------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """How to realize noise for a trial at nominal rate ``p``.

    ``toy_ratios`` are the ``(l, m, h)`` fractions of the single-qubit total.
    With ``p1_fraction`` set, singles occur at ``p1 = p1_fraction * p`` and the pair
    rate is derived as ``(p - p1) / pair_neighbours`` instead of read from ``p2``.
    """

    kind: NoiseKind = NoiseKind.IID
    p: float = 0.1
    bias: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    sigma_p: float = 0.0
    sigma_tot: float = 0.0
    toy_ratios: tuple[float, float, float] = (1 / 6, 1 / 3, 1 / 2)
    p1_fraction: float | None = None
    pair_kind: PairKind | None = None
    p2: float = 0.0
    pxx: float = 0.5
    pair_neighbours: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.pair_kind is not None:
            object.__setattr__(self, "pair_kind", PairKind(self.pair_kind))
        if not 0 <= self.p <= 1:
            raise ValueError("p must be in [0, 1]")
        if self.kind is NoiseKind.GAUSSIAN and self.single_rate == 0 and self.sigma_tot > 0:
            raise ValueError("p = 0 with sigma_tot > 0 has a degenerate scale")

    @property
    def single_rate(self) -> float:
        return self.p if self.p1_fraction is None else self.p1_fraction * self.p

    @property
    def pair_rate(self) -> float:
        if self.pair_kind is None:
            return 0.0
        if self.p1_fraction is None:
            return self.p2
        return (self.p - self.single_rate) / self.pair_neighbours

    @property
    def disordered(self) -> bool:
        if self.kind is NoiseKind.TOY:
            return True
        return self.kind is NoiseKind.GAUSSIAN and (self.sigma_p > 0 or self.sigma_tot > 0)

    @property
    def pair_channel(self) -> PairChannel | None:
        if self.pair_kind is None or self.pair_rate == 0:
            return None
        return PairChannel(self.pair_kind, self.pair_rate, self.pxx)

    def with_p(self, p: float) -> NoiseSpec:
        return replace(self, p=p)

    def rates(self, n: int, rng: np.random.Generator, shots: int | None = None) -> np.ndarray:
        """``(N, 3)`` rates, or ``(shots, N, 3)`` independent realizations."""
        q = self.single_rate
        shape = (n,) if shots is None else (shots, n)
        if self.kind is NoiseKind.IID:
            return np.broadcast_to(q * np.asarray(self.bias, dtype=float), shape + (3,)).copy()
        if self.kind is NoiseKind.TOY:
            l, m, h = (q * r for r in self.toy_ratios)
            flat = toy_permutation_rates(l, m, h, int(np.prod(shape)), rng)
            return flat.reshape(shape + (3,))
        return gaussian_rates(q, self.sigma_p, self.sigma_tot, shape, rng)

    def realize(self, n: int, rng: np.random.Generator) -> NoiseModel:
        desc = NoiseDescriptor(self.kind, self.p, self.sigma_p, self.sigma_tot)
        return NoiseModel(self.rates(n, rng), desc, self.pair_channel)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        out["pair_kind"] = None if self.pair_kind is None else self.pair_kind.value
        out["p2"] = self.pair_rate
        out["bias"] = list(self.bias)
        out["toy_ratios"] = list(self.toy_ratios)
        return out


def combined_pair_spec(
    p: float, p1_fraction: float = 0.25, pair_kind: PairKind | str = PairKind.XZ, neighbours: int = 4
) -> NoiseSpec:
    """Depolarizing singles at ``p1_fraction * p`` plus pair events filling the rest."""
    return NoiseSpec(
        NoiseKind.IID,
        p,
        p1_fraction=p1_fraction,
        pair_kind=PairKind(pair_kind),
        pair_neighbours=neighbours,
    )
