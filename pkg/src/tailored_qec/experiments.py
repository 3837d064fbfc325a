"""Monte Carlo sweeps, threshold fits and sub-threshold scaling.

Trials are simulated in *flip space*: for each qubit we only track whether the
error anticommutes with the letter measured by its vertical pair and by its
horizontal pair. Syndromes, corrections and logical classification are all linear
in these two bits, which makes the whole pipeline vectorizable and independent of
the specific deformation.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import __version__
from .codes import CodeFamily, build_css, family_letters, high_medium_letters, logical_masks, mmhh_letters
from .decoder import MatchingDecoder, NoiseContext, WeightMetric
from .geometry import SUBLATTICES, Lattice, LatticeSpec, Layout, Sublattice, build_lattice
from .noise import NoiseKind, NoiseSpec, PairKind, sample_pairs, sample_single_qubit
from .pauli import anticommute_codes

BLOCK_SIZE = 1000

CSV_COLUMNS = [
    "family", "metric", "d1", "d2", "p", "sigma_p", "sigma_tot", "pair_kind", "p2",
    "trials", "failures", "p_fail", "stderr", "seed",
    "layout", "noise_kind", "x_flips", "z_flips", "y_flips",
]


@dataclass(frozen=True)
class ExperimentSpec:
    family: CodeFamily
    lattices: tuple[tuple[int, int], ...]
    noise: NoiseSpec
    metric: WeightMetric
    p_grid: tuple[float, ...]
    trials: int
    master_seed: int = 0
    layout: Layout = Layout.NON_ROTATED

    def __post_init__(self):
        object.__setattr__(self, "family", CodeFamily(self.family))
        object.__setattr__(self, "layout", Layout(self.layout))
        lattices = tuple(
            (int(x), int(x)) if np.isscalar(x) else (int(x[0]), int(x[1])) for x in self.lattices
        )
        object.__setattr__(self, "lattices", lattices)
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.lattices:
            raise ValueError("need at least one lattice")
        if not self.p_grid:
            raise ValueError("need at least one p value")
        if any(b <= a for a, b in zip(self.p_grid, self.p_grid[1:])):
            raise ValueError("p grid must be strictly increasing")
        if any(not 0 <= p <= 1 for p in self.p_grid):
            raise ValueError("p values must lie in [0, 1]")
        for d1, d2 in self.lattices:
            LatticeSpec(d1, d2, self.layout)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "layout": self.layout.value,
            "lattices": [list(x) for x in self.lattices],
            "noise": self.noise.to_dict(),
            "metric": {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(self.metric).items()},
            "p_grid": list(self.p_grid),
            "trials": self.trials,
            "master_seed": self.master_seed,
        }

    @property
    def stamp(self) -> str:
        digest = hashlib.sha1(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:10]
        return f"{__version__}+{digest}"


@dataclass(frozen=True)
class PointResult:
    family: str
    metric: str
    d1: int
    d2: int
    p: float
    sigma_p: float
    sigma_tot: float
    pair_kind: str
    p2: float
    trials: int
    failures: int
    p_fail: float
    stderr: float
    seed: int
    layout: str = Layout.NON_ROTATED.value
    noise_kind: str = NoiseKind.IID.value
    x_flips: int = 0
    z_flips: int = 0
    y_flips: int = 0

    @property
    def distance(self) -> int:
        return min(self.d1, self.d2)

    @classmethod
    def from_row(cls, row: dict) -> PointResult:
        ints = {"d1", "d2", "trials", "failures", "seed", "x_flips", "z_flips", "y_flips"}
        floats = {"p", "sigma_p", "sigma_tot", "p2", "p_fail", "stderr"}
        kw = {}
        for name in CSV_COLUMNS:
            if name not in row:
                continue
            val = row[name]
            if name in ints:
                kw[name] = int(val)
            elif name in floats:
                kw[name] = float(val)
            else:
                kw[name] = str(val)
        return cls(**kw)


def binomial_stderr(failures: int, trials: int) -> float:
    f = failures / trials
    return math.sqrt(f * (1 - f) / trials)


@dataclass
class SweepResult:
    points: list[PointResult]
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def select(self, **filters) -> SweepResult:
        keep = [pt for pt in self.points if all(getattr(pt, k) == v for k, v in filters.items())]
        return SweepResult(keep, dict(self.metadata))

    def to_csv(self, path: str | Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for pt in self.points:
                writer.writerow(asdict(pt))
        tmp.replace(path)

    @classmethod
    def from_csv(cls, path: str | Path) -> SweepResult:
        with open(path, newline="") as fh:
            rows = [PointResult.from_row(r) for r in csv.DictReader(fh)]
        meta = {}
        manifest = Path(path).with_suffix(".json")
        if manifest.exists():
            meta = json.loads(manifest.read_text())
        return cls(rows, meta)

    def write_manifest(self, path: str | Path):
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.metadata, indent=2, sort_keys=True))
        tmp.replace(path)

    @staticmethod
    def merge(results: Iterable[SweepResult]) -> SweepResult:
        pts: list[PointResult] = []
        meta: dict = {"parts": []}
        for r in results:
            pts += r.points
            meta["parts"].append(r.metadata)
        return SweepResult(pts, meta)


# simulation core --------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _lattice_data(spec: LatticeSpec):
    lattice = build_lattice(spec)
    masks = logical_masks(build_css(lattice))
    h_primal = lattice.h_sublattice
    checks = {s: lattice.graphs[s].check_matrix.tocsr() for s in SUBLATTICES}
    pairs = np.asarray(lattice.nn_pairs, dtype=np.int64)
    return lattice, masks, h_primal, checks, pairs


@functools.lru_cache(maxsize=64)
def _decoder(spec: LatticeSpec, metric: WeightMetric) -> MatchingDecoder:
    return MatchingDecoder(build_lattice(spec), metric)


def block_generator(master_seed: int, d1: int, d2: int, p: float, block: int) -> np.random.Generator:
    """Counter-based stream for one block of trials at one sweep coordinate."""
    key = (int(d1), int(d2), int(round(p * 1e9)), int(block))
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def _letters_for(family: CodeFamily, lattice: Lattice, rates: np.ndarray):
    """Per-trial (or fixed) v/h letters; ``rates`` may carry a leading trial axis."""
    if family in (CodeFamily.MHHM, CodeFamily.MMHH):
        shape = rates.shape[:-1]
        flat = rates.reshape(-1, 3)
        if family is CodeFamily.MHHM:
            v, h = high_medium_letters(flat)
        else:
            high, medium = high_medium_letters(flat)
            xv, xh = family_letters(CodeFamily.XXZZ, lattice)
            n = lattice.n_qubits
            xv = np.broadcast_to(xv, shape).reshape(-1)
            xh = np.broadcast_to(xh, shape).reshape(-1)
            v = np.where(xv == 1, medium, high)
            h = np.where(xh == 1, medium, high)
        return v.reshape(shape).astype(np.uint8), h.reshape(shape).astype(np.uint8)
    return family_letters(family, lattice)


def simulate_block(
    family: CodeFamily,
    lattice_spec: LatticeSpec,
    noise: NoiseSpec,
    metric: WeightMetric,
    shots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Tallies ``[failures, xbar, zbar, ybar]`` over ``shots`` trials."""
    lattice, masks, h_primal, checks, pairs = _lattice_data(lattice_spec)
    xbar_v, xbar_h, zbar_v, zbar_h = masks
    n = lattice.n_qubits
    disordered = noise.disordered
    rates = noise.rates(n, rng, shots=shots if disordered else None)
    v, h = _letters_for(family, lattice, rates)
    errors = sample_single_qubit(rates, shots, rng)
    channel = noise.pair_channel
    if channel is not None:
        errors ^= sample_pairs(channel, pairs, n, shots, rng)
    fv = anticommute_codes(errors, v).astype(np.uint8)
    fh = anticommute_codes(errors, h).astype(np.uint8)
    flips = {
        Sublattice.PRIMAL: np.where(h_primal, fh, fv),
        Sublattice.DUAL: np.where(h_primal, fv, fh),
    }
    decoder = _decoder(lattice_spec, metric)
    per_trial = decoder.needs_context and (disordered or np.ndim(v) == 2)
    residual = {}
    for sub in SUBLATTICES:
        syn = (checks[sub] @ flips[sub].T).T % 2
        syn = syn.astype(np.uint8)
        if not per_trial:
            ctx = NoiseContext(rates, v, h, channel) if decoder.needs_context else None
            corr = decoder.decode_syndromes(sub, syn, ctx)
        else:
            corr = np.empty_like(flips[sub])
            vv = np.broadcast_to(v, (shots, n))
            hh = np.broadcast_to(h, (shots, n))
            rr = np.broadcast_to(rates, (shots, n, 3))
            for t in range(shots):
                ctx = NoiseContext(rr[t], vv[t], hh[t], channel)
                corr[t] = decoder.decode_syndromes(sub, syn[t : t + 1], ctx)[0]
        residual[sub] = flips[sub] ^ corr
    rh = np.where(h_primal, residual[Sublattice.PRIMAL], residual[Sublattice.DUAL]).astype(bool)
    rv = np.where(h_primal, residual[Sublattice.DUAL], residual[Sublattice.PRIMAL]).astype(bool)
    x_flip = ((rv & zbar_v) ^ (rh & zbar_h)).sum(axis=1) % 2 == 1
    z_flip = ((rv & xbar_v) ^ (rh & xbar_h)).sum(axis=1) % 2 == 1
    both = x_flip & z_flip
    return np.array(
        [
            int((x_flip | z_flip).sum()),
            int((x_flip & ~both).sum()),
            int((z_flip & ~both).sum()),
            int(both.sum()),
        ],
        dtype=np.int64,
    )


def _run_task(task) -> tuple[tuple, np.ndarray]:
    key, family, lattice_spec, noise, metric, shots, seed_args = task
    rng = block_generator(*seed_args)
    try:
        tally = simulate_block(family, lattice_spec, noise, metric, shots, rng)
    except Exception as exc:  # attach the sweep coordinates
        raise RuntimeError(f"trial block failed at d=({lattice_spec.d1},{lattice_spec.d2}) p={noise.p} "
                           f"block={seed_args[-1]}: {exc}") from exc
    return key, tally


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> SweepResult:
    """Failure tallies for every (lattice, p) of ``spec``; deterministic in the seed."""
    tasks = []
    for d1, d2 in spec.lattices:
        lspec = LatticeSpec(d1, d2, spec.layout)
        for p in spec.p_grid:
            noise = spec.noise.with_p(p)
            n_blocks = -(-spec.trials // BLOCK_SIZE)
            for b in range(n_blocks):
                shots = min(BLOCK_SIZE, spec.trials - b * BLOCK_SIZE)
                tasks.append(
                    ((d1, d2, p), spec.family, lspec, noise, spec.metric, shots,
                     (spec.master_seed, d1, d2, p, b))
                )
    totals: dict[tuple, np.ndarray] = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, tally in pool.map(_run_task, tasks, chunksize=1):
                totals[key] = totals.get(key, 0) + tally
    else:
        for task in tasks:
            key, tally = _run_task(task)
            totals[key] = totals.get(key, 0) + tally
    points = []
    for d1, d2 in spec.lattices:
        for p in spec.p_grid:
            fails, xf, zf, yf = (int(v) for v in totals[(d1, d2, p)])
            noise = spec.noise.with_p(p)
            points.append(
                PointResult(
                    family=spec.family.value,
                    metric=spec.metric.name,
                    d1=d1,
                    d2=d2,
                    p=p,
                    sigma_p=noise.sigma_p,
                    sigma_tot=noise.sigma_tot,
                    pair_kind="" if noise.pair_kind is None else noise.pair_kind.value,
                    p2=noise.pair_rate,
                    trials=spec.trials,
                    failures=fails,
                    p_fail=fails / spec.trials,
                    stderr=binomial_stderr(fails, spec.trials),
                    seed=spec.master_seed,
                    layout=spec.layout.value,
                    noise_kind=noise.kind.value,
                    x_flips=xf,
                    z_flips=zf,
                    y_flips=yf,
                )
            )
    meta = {"spec": spec.to_dict(), "version": spec.stamp, "block_size": BLOCK_SIZE}
    return SweepResult(points, meta)


# threshold fit ---------------------------------------------------------------------


class ThresholdFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThresholdFit:
    p_th: float
    nu: float
    B0: float
    B1: float
    B2: float
    covariance: np.ndarray
    fit_window: tuple[float, float]
    distances: tuple[int, ...]
    chi2: float
    dof: int

    @property
    def p_th_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def nu_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance[1, 1], 0.0)))

    @property
    def alpha_beta(self) -> tuple[float, float]:
        return 1.0, 1.0 / self.nu

    def to_dict(self) -> dict:
        return {
            "p_th": self.p_th,
            "p_th_stderr": self.p_th_stderr,
            "nu": self.nu,
            "nu_stderr": self.nu_stderr,
            "B": [self.B0, self.B1, self.B2],
            "covariance": self.covariance.tolist(),
            "fit_window": list(self.fit_window),
            "distances": list(self.distances),
            "chi2": self.chi2,
            "dof": self.dof,
        }


def scaling_model(params, p, d):
    p_th, nu, b0, b1, b2 = params
    x = (p - p_th) * d ** (1.0 / nu)
    return b0 + b1 * x + b2 * x * x


def _collect(results) -> list[PointResult]:
    if isinstance(results, SweepResult):
        return list(results.points)
    pts: list[PointResult] = []
    for r in results:
        if isinstance(r, SweepResult):
            pts += r.points
        else:
            pts.append(r)
    return pts


def _sigma(pt: PointResult) -> float:
    # a zero-failure point still carries an uncertainty of about one event
    return max(pt.stderr, 1.0 / pt.trials)


def fit_threshold(
    results, window: tuple[float, float] | None = None, n_starts: int = 25
) -> ThresholdFit:
    """Finite-size scaling fit ``P = B0 + B1 x + B2 x^2``, ``x = (p - p_th) d^(1/nu)``."""
    pts = _collect(results)
    if window is not None:
        lo, hi = window
        pts = [pt for pt in pts if lo - 1e-12 <= pt.p <= hi + 1e-12]
    if not pts:
        raise ThresholdFitError("no data inside the fit window")
    ds = sorted({pt.distance for pt in pts})
    ps = sorted({pt.p for pt in pts})
    if len(ds) < 3:
        raise ThresholdFitError(f"need at least 3 distances, got {ds}")
    if len(ps) < 4:
        raise ThresholdFitError(f"need at least 4 p values in the window, got {len(ps)}")
    lo, hi = (min(ps), max(ps)) if window is None else window
    _check_crossing(pts, ds)
    p = np.array([pt.p for pt in pts])
    d = np.array([pt.distance for pt in pts], dtype=float)
    y = np.array([pt.p_fail for pt in pts])
    w = 1.0 / np.array([_sigma(pt) for pt in pts])

    def inner(p_th, nu):
        x = (p - p_th) * d ** (1.0 / nu)
        design = np.stack([np.ones_like(x), x, x * x], axis=1) * w[:, None]
        coef, *_ = np.linalg.lstsq(design, y * w, rcond=None)
        r = design @ coef - y * w
        return float(r @ r), coef

    best = None
    for p0 in np.linspace(lo, hi, n_starts):
        for nu0 in (0.7, 1.0, 1.3, 1.7, 2.2):
            chi2, coef = inner(p0, nu0)
            if best is None or chi2 < best[0]:
                best = (chi2, p0, nu0, coef)
    _, p0, nu0, coef = best

    def resid(theta):
        return (scaling_model(theta, p, d) - y) * w

    start = np.array([p0, nu0, *coef])
    sol = least_squares(resid, start, method="lm", x_scale="jac", max_nfev=20000)
    if not sol.success:
        raise ThresholdFitError(f"fit did not converge: {sol.message}")
    p_th, nu = float(sol.x[0]), float(sol.x[1])
    if not (lo <= p_th <= hi):
        raise ThresholdFitError(f"fitted crossing p_th={p_th:.4g} lies outside the window [{lo}, {hi}]")
    if not (0.05 < nu < 20):
        raise ThresholdFitError(f"fitted exponent nu={nu:.4g} is unphysical")
    jac = sol.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jac.T @ jac)
    chi2 = float(sol.fun @ sol.fun)
    return ThresholdFit(
        p_th, nu, float(sol.x[2]), float(sol.x[3]), float(sol.x[4]), cov,
        (float(lo), float(hi)), tuple(int(x) for x in ds), chi2, len(pts) - 5,
    )


def _check_crossing(pts: list[PointResult], ds: list[int]):
    """Smallest and largest distance must swap order across the window."""
    small = {pt.p: pt.p_fail for pt in pts if pt.distance == ds[0]}
    large = {pt.p: pt.p_fail for pt in pts if pt.distance == ds[-1]}
    common = sorted(set(small) & set(large))
    if len(common) < 2:
        raise ThresholdFitError("smallest and largest distance share fewer than 2 p values")
    low, high = common[0], common[-1]
    if not (large[low] < small[low] and large[high] > small[high]):
        raise ThresholdFitError("failure curves do not cross inside the window")


# sub-threshold scaling ----------------------------------------------------------------


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    stderr: float
    intercept: float
    distances: tuple[int, ...]


def subthreshold_scan(data, workers: int = 1) -> SlopeEstimate:
    """Weighted least-squares slope of ``ln p_fail`` against ``d``.

    ``data`` is an :class:`ExperimentSpec` with a single p value (run here) or
    results of such a run.
    """
    if isinstance(data, ExperimentSpec):
        if len(data.p_grid) != 1:
            raise ValueError("sub-threshold scan runs at one fixed p")
        data = run_sweep(data, workers=workers)
    pts = _collect(data)
    if len({pt.p for pt in pts}) != 1:
        raise ValueError("sub-threshold scan needs results at a single p")
    kept = []
    for pt in pts:
        if pt.failures == 0:
            warnings.warn(f"dropping d={pt.distance}: no failures in {pt.trials} trials", stacklevel=2)
            continue
        kept.append(pt)
    if len(kept) < 2:
        raise ValueError("need at least two distances with failures")
    d = np.array([pt.distance for pt in kept], dtype=float)
    y = np.log([pt.p_fail for pt in kept])
    sig = np.array([pt.stderr / pt.p_fail if pt.stderr > 0 else 1.0 for pt in kept])
    w = 1.0 / sig**2
    design = np.stack([np.ones_like(d), d], axis=1)
    a = design.T @ (design * w[:, None])
    cov = np.linalg.inv(a)
    coef = cov @ (design.T @ (w * y))
    return SlopeEstimate(float(coef[1]), float(math.sqrt(cov[1, 1])), float(coef[0]),
                         tuple(int(x) for x in d))


def failure_rate_pairs(a: SweepResult, b: SweepResult) -> list[tuple[int, PointResult, PointResult]]:
    """Points of two sweeps matched on (d1, d2, p)."""
    index = {(pt.d1, pt.d2, pt.p): pt for pt in b.points}
    out = []
    for pt in a.points:
        other = index.get((pt.d1, pt.d2, pt.p))
        if other is not None:
            out.append((pt.distance, pt, other))
    return sorted(out, key=lambda t: (t[0], t[1].p))


def separation(a: PointResult, b: PointResult) -> float:
    """(a - b) in units of the combined standard error."""
    s = math.hypot(a.stderr, b.stderr)
    if s == 0:
        return 0.0 if a.p_fail == b.p_fail else math.copysign(math.inf, a.p_fail - b.p_fail)
    return (a.p_fail - b.p_fail) / s


# degeneracy study -----------------------------------------------------------------------


DEGENERACY_PANELS = {
    ("non_rotated", "single"): 0.1,
    ("rotated", "single"): 0.1,
    ("non_rotated", "pair"): 0.1,
    ("rotated", "pair"): 0.05,
}


@dataclass(frozen=True)
class DegeneracyRow:
    distance: int
    baseline: PointResult
    degenerate: PointResult

    @property
    def z(self) -> float:
        """Positive when the degeneracy metric lowers the failure rate."""
        return separation(self.baseline, self.degenerate)


def degeneracy_noise(error_kind: str, p: float) -> NoiseSpec:
    if error_kind == "single":
        return NoiseSpec(NoiseKind.IID, p)
    if error_kind == "pair":
        from .noise import combined_pair_spec

        return combined_pair_spec(p, 0.25, PairKind.XZ)
    raise ValueError(f"unknown error kind {error_kind!r}")


def degeneracy_study(
    layout: Layout | str,
    error_kind: str,
    metrics: tuple[WeightMetric, WeightMetric] = (WeightMetric.manhattan(), WeightMetric.degeneracy()),
    distances: Sequence[int] = (5, 7, 9, 11),
    trials: int = 10_000,
    master_seed: int = 0,
    p: float | None = None,
    family: CodeFamily = CodeFamily.XZZX,
    workers: int = 1,
) -> list[DegeneracyRow]:
    """Failure rates with and without the degeneracy term for one panel."""
    layout = Layout(layout)
    if error_kind not in ("single", "pair"):
        raise ValueError(f"unknown error kind {error_kind!r}")
    if p is None:
        p = DEGENERACY_PANELS[(layout.value, error_kind)]
    noise = degeneracy_noise(error_kind, p)
    results = []
    for metric in metrics:
        spec = ExperimentSpec(family, tuple(distances), noise, metric, (p,), trials, master_seed, layout)
        results.append(run_sweep(spec, workers=workers))
    return [DegeneracyRow(dist, a, b) for dist, a, b in failure_rate_pairs(*results)]


def replace_trials(spec: ExperimentSpec, trials: int) -> ExperimentSpec:
    return replace(spec, trials=int(trials))
