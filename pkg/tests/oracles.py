"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np


def brute_force_matching(n: int, weights: dict[tuple[int, int], float]) -> float:
    """Minimum total weight of a perfect matching by subset DP; ``inf`` if none exists."""
    w = {}
    for (a, b), val in weights.items():
        key = (min(a, b), max(a, b))
        w[key] = min(val, w.get(key, math.inf))

    @functools.lru_cache(maxsize=None)
    def best(mask: int) -> float:
        if mask == 0:
            return 0.0
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        out = math.inf
        j_mask = rest
        while j_mask:
            j = (j_mask & -j_mask).bit_length() - 1
            j_mask &= j_mask - 1
            if (i, j) in w:
                out = min(out, w[(i, j)] + best(rest & ~(1 << j)))
        return out

    return best((1 << n) - 1)


def _bits(values: np.ndarray, masks: list[int]) -> np.ndarray:
    """Column j holds the parity of ``values & masks[j]``."""
    out = np.zeros(values.shape + (len(masks),), dtype=np.int64)
    for j, m in enumerate(masks):
        out[..., j] = np.bitwise_count(values & m) & 1
    return out


def coset_histogram(stabilizers, xbar, zbar, n: int) -> np.ndarray:
    """Counts ``H[s, c, w]`` of n-qubit Paulis with syndrome ``s``, logical class ``c`` and weight ``w``.

    Operators are given as ``(x, z)`` integer bit masks. The class packs
    (anticommutes with zbar, anticommutes with xbar) as ``2 * a + b``.
    """
    m = len(stabilizers)
    if n > 14:
        raise ValueError("exhaustive enumeration is limited to 14 qubits")
    allv = np.arange(1 << n, dtype=np.int64)
    # anticommutation of (x, z) with (sx, sz) is parity(x & sz) ^ parity(z & sx)
    weights_syn = 1 << np.arange(m, dtype=np.int64)
    syn_x = _bits(allv, [sz for _, sz in stabilizers]) @ weights_syn
    syn_z = _bits(allv, [sx for sx, _ in stabilizers]) @ weights_syn
    cls_x = _bits(allv, [zbar[1], xbar[1]]) @ np.array([2, 1])
    cls_z = _bits(allv, [zbar[0], xbar[0]]) @ np.array([2, 1])
    hist = np.zeros((1 << m) * 4 * (n + 1), dtype=np.int64)
    chunk = max(1, (1 << 19) >> n)
    for start in range(0, 1 << n, chunk):
        xs = allv[start : start + chunk, None]
        syn = syn_x[xs] ^ syn_z[None, :]
        cls = cls_x[xs] ^ cls_z[None, :]
        wt = np.bitwise_count(xs | allv[None, :]).astype(np.int64)
        idx = ((syn * 4 + cls) * (n + 1) + wt).ravel()
        hist += np.bincount(idx, minlength=hist.size)
    return hist.reshape(1 << m, 4, n + 1)


def coset_probabilities(hist: np.ndarray, p: float) -> np.ndarray:
    """``P[s, c]`` under iid depolarizing noise of total rate ``p``."""
    n = hist.shape[2] - 1
    w = np.arange(n + 1)
    prob_w = (p / 3) ** w * (1 - p) ** (n - w)
    return hist @ prob_w


def ml_failure_rate(probs: np.ndarray) -> float:
    return float(1.0 - probs.max(axis=1).sum())


def decoder_failure_rate(probs: np.ndarray, chosen: np.ndarray) -> float:
    """Failure rate of a decoder whose correction for syndrome ``s`` lies in class ``chosen[s]``."""
    return float(1.0 - probs[np.arange(len(chosen)), chosen].sum())


def all_syndromes(m: int):
    for s in range(1 << m):
        yield s, np.array([(s >> j) & 1 for j in range(m)], dtype=np.uint8)


def pauli_strings(n: int, max_weight: int):
    for w in range(max_weight + 1):
        for qubits in itertools.combinations(range(n), w):
            for letters in itertools.product("XYZ", repeat=w):
                yield dict(zip(qubits, letters))
