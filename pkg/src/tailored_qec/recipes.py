"""Figure recipes: which sweeps a plot needs and how to turn stored results into curves."""

from __future__ import annotations

import csv
import html
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .codes import CodeFamily
from .decoder import WeightMetric
from .experiments import ExperimentSpec, PointResult, SweepResult, ThresholdFitError, binomial_stderr, fit_threshold
from .geometry import Layout
from .noise import NoiseKind, NoiseSpec, PairKind, combined_pair_spec

SUBTHRESHOLD_D = (5, 7, 9, 11)
THRESHOLD_D = (7, 9, 11, 13)


class MissingResults(LookupError):
    """Raised when stored sweeps do not cover what a recipe needs."""

    def __init__(self, missing: list[str]):
        self.missing = missing
        head = "\n  ".join(missing[:50])
        more = f"\n  ... and {len(missing) - 50} more" if len(missing) > 50 else ""
        super().__init__(f"{len(missing)} result point(s) missing:\n  {head}{more}")


@dataclass(frozen=True)
class Series:
    """One plotted curve backed by one sweep; ``x`` is ``"d"`` or ``"p"``."""

    label: str
    spec: ExperimentSpec
    x: str = "d"


@dataclass(frozen=True)
class FitSeries:
    """A curve of fitted thresholds, one fit per x value."""

    label: str
    points: tuple[tuple[float, ExperimentSpec], ...]
    x_name: str = "sigma_p"


@dataclass(frozen=True)
class Recipe:
    name: str
    title: str
    series: tuple[Series | FitSeries, ...]
    log_y: bool = True
    x_label: str = "d"
    window: tuple[float, float] | None = None

    def specs(self) -> list[ExperimentSpec]:
        out = []
        for s in self.series:
            if isinstance(s, Series):
                out.append(s.spec)
            else:
                out += [spec for _, spec in s.points]
        return out


def _gauss(sigma_p: float, sigma_tot: float) -> NoiseSpec:
    return NoiseSpec(NoiseKind.GAUSSIAN, 0.1, sigma_p=sigma_p, sigma_tot=sigma_tot)


def _metric_for(family: CodeFamily, dijkstra: bool) -> WeightMetric:
    if dijkstra:
        return WeightMetric.dijkstra()
    if family is CodeFamily.MHHM:
        return WeightMetric.weighted_manhattan()
    return WeightMetric.manhattan()


def _grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(float(round(v, 6)) for v in np.linspace(lo, hi, n))


def build_recipe(name: str, trials: int | None = None, seed: int = 0) -> Recipe:
    """The sweeps behind one figure. ``trials`` overrides the per-recipe default."""
    sub_trials = trials or 100_000
    th_trials = trials or 50_000
    th_grid = _grid(0.14, 0.22, 9)
    if name == "fig5a":
        series = []
        for sp in (0.125, 0.5):
            for fam in (CodeFamily.CSS, CodeFamily.MMHH):
                spec = ExperimentSpec(fam, SUBTHRESHOLD_D, _gauss(sp, 0.5), WeightMetric.manhattan(),
                                      (0.1,), sub_trials, seed)
                series.append(Series(f"{fam.value} sigma_p={sp}", spec))
        return Recipe(name, "sub-threshold failure, p=0.1, sigma_tot=0.5", tuple(series))
    if name == "fig5b":
        series = []
        for st in (0.25, 0.5):
            for dij in (False, True):
                metric = _metric_for(CodeFamily.MHHM, dij)
                spec = ExperimentSpec(CodeFamily.MHHM, SUBTHRESHOLD_D, _gauss(0.5, st), metric, (0.1,),
                                      sub_trials, seed)
                series.append(Series(f"MHHM {metric.name} sigma_tot={st}", spec))
        return Recipe(name, "sub-threshold failure, p=0.1, sigma_p=0.5", tuple(series))
    if name == "fig7":
        noise = combined_pair_spec(0.125, 0.25, PairKind.XZ)
        series = tuple(
            Series(m.name, ExperimentSpec(CodeFamily.XZZX, SUBTHRESHOLD_D, noise, m, (0.125,), sub_trials, seed))
            for m in (WeightMetric.manhattan(), WeightMetric.degeneracy(), WeightMetric.degeneracy_plus_correlation())
        )
        return Recipe(name, "XZZX with XZ pair errors, p=0.125, p1=0.25p", series)
    if name in ("fig9", "fig11"):
        dij = name == "fig11"
        series = []
        for st in (0.5, 0.0):
            for fam in (CodeFamily.CSS, CodeFamily.MMHH, CodeFamily.MHHM):
                metric = _metric_for(fam, dij)
                spec = ExperimentSpec(fam, THRESHOLD_D, _gauss(0.5, st), metric, th_grid, th_trials, seed)
                for d in THRESHOLD_D:
                    series.append(Series(f"{fam.value} sigma_tot={st} d={d}", _single_d(spec, d), x="p"))
        return Recipe(name, f"near-threshold failure ({'shortest weighted paths' if dij else 'Manhattan'})",
                      tuple(series), log_y=False, x_label="p")
    if name == "fig10":
        series = []
        for fam in (CodeFamily.CSS, CodeFamily.MMHH):
            pts = tuple(
                (sp, ExperimentSpec(fam, THRESHOLD_D, _gauss(sp, 0.5), WeightMetric.manhattan(), th_grid,
                                    th_trials, seed))
                for sp in (0.0, 0.125, 0.25, 0.375, 0.5)
            )
            series.append(FitSeries(fam.value, pts, "sigma_p"))
        return Recipe(name, "threshold vs sigma_p (sigma_tot=0.5)", tuple(series), log_y=False, x_label="sigma_p")
    if name == "fig12":
        series = []
        for dij in (False, True):
            metric = _metric_for(CodeFamily.MMHH, dij)
            pts = tuple(
                (st, ExperimentSpec(CodeFamily.MMHH, THRESHOLD_D, _gauss(0.5, st), metric, th_grid, th_trials, seed))
                for st in (0.0, 0.25, 0.5)
            )
            series.append(FitSeries(f"MMHH {metric.name}", pts, "sigma_tot"))
        return Recipe(name, "MMHH threshold vs sigma_tot (sigma_p=0.5)", tuple(series), log_y=False,
                      x_label="sigma_tot")
    if name == "fig13":
        from .experiments import DEGENERACY_PANELS, degeneracy_noise

        series = []
        for (layout, kind), p in DEGENERACY_PANELS.items():
            for m in (WeightMetric.manhattan(), WeightMetric.degeneracy()):
                spec = ExperimentSpec(CodeFamily.XZZX, SUBTHRESHOLD_D, degeneracy_noise(kind, p), m, (p,),
                                      sub_trials, seed, Layout(layout))
                series.append(Series(f"{layout} {kind} {m.name}", spec))
        return Recipe(name, "with and without the degeneracy term", tuple(series))
    raise KeyError(f"unknown figure recipe {name!r}; choose from {', '.join(RECIPES)}")


RECIPES = ("fig5a", "fig5b", "fig7", "fig9", "fig10", "fig11", "fig12", "fig13")


def _single_d(spec: ExperimentSpec, d: int) -> ExperimentSpec:
    from dataclasses import replace

    return replace(spec, lattices=((d, d),))


# matching stored rows -----------------------------------------------------------------


def _key(family, metric, layout, noise_kind, sigma_p, sigma_tot, pair_kind, d1, d2, p):
    return (family, metric, layout, noise_kind, round(float(sigma_p), 6), round(float(sigma_tot), 6),
            pair_kind or "", int(d1), int(d2), round(float(p), 9))


def point_key(pt: PointResult):
    return _key(pt.family, pt.metric, pt.layout, pt.noise_kind, pt.sigma_p, pt.sigma_tot, pt.pair_kind,
                pt.d1, pt.d2, pt.p)


def spec_keys(spec: ExperimentSpec):
    noise = spec.noise
    pk = "" if noise.pair_kind is None else noise.pair_kind.value
    for d1, d2 in spec.lattices:
        for p in spec.p_grid:
            yield _key(spec.family.value, spec.metric.name, spec.layout.value, noise.kind.value,
                       noise.sigma_p, noise.sigma_tot, pk, d1, d2, p)


def load_results(directory: str | Path) -> list[PointResult]:
    pts = []
    for path in sorted(Path(directory).glob("**/*.csv")):
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), [])
        if "failures" in header and "family" in header:
            pts += SweepResult.from_csv(path).points
    return pts


def index_results(points: Sequence[PointResult]) -> dict:
    """Pool rows per sweep coordinate; repeated rows from one seed count once."""
    seen = {}
    for pt in points:
        seen[(point_key(pt), pt.seed, pt.trials)] = pt
    pooled: dict = {}
    for (key, _, _), pt in seen.items():
        if key in pooled:
            prev = pooled[key]
            f, t = prev.failures + pt.failures, prev.trials + pt.trials
            pooled[key] = PointResult(**{**prev.__dict__, "failures": f, "trials": t, "p_fail": f / t,
                                         "stderr": binomial_stderr(f, t)})
        else:
            pooled[key] = pt
    return pooled


def _describe(key) -> str:
    fam, metric, layout, nk, sp, st, pk, d1, d2, p = key
    pair = f" pairs={pk}" if pk else ""
    return f"{fam} {metric} {layout} {nk} sigma=({sp},{st}){pair} d=({d1},{d2}) p={p}"


@dataclass
class CurveData:
    label: str
    x: list[float] = field(default_factory=list)
    y: list[float] = field(default_factory=list)
    err: list[float] = field(default_factory=list)


def curves(recipe: Recipe, points: Sequence[PointResult]) -> list[CurveData]:
    index = index_results(points)
    missing = [_describe(k) for spec in recipe.specs() for k in spec_keys(spec) if k not in index]
    if missing:
        raise MissingResults(missing)
    out = []
    for s in recipe.series:
        c = CurveData(s.label)
        if isinstance(s, Series):
            for key in spec_keys(s.spec):
                pt = index[key]
                c.x.append(float(pt.distance if s.x == "d" else pt.p))
                c.y.append(pt.p_fail)
                c.err.append(pt.stderr)
        else:
            for xval, spec in s.points:
                rows = [index[k] for k in spec_keys(spec)]
                try:
                    fit = fit_threshold(rows, recipe.window)
                except ThresholdFitError:
                    c.x.append(float(xval))
                    c.y.append(math.nan)
                    c.err.append(math.nan)
                    continue
                c.x.append(float(xval))
                c.y.append(fit.p_th)
                c.err.append(fit.p_th_stderr)
        out.append(c)
    return out


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").lower()


def write_curves(recipe: Recipe, data: list[CurveData], out_dir: str | Path, echo: dict) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    ycol = "p_th" if any(isinstance(s, FitSeries) for s in recipe.series) else "p_fail"
    for c in data:
        path = out_dir / f"{recipe.name}_{slug(c.label)}.csv"
        tmp = path.with_suffix(".csv.tmp")
        with open(tmp, "w", newline="") as fh:
            fh.write(f"# recipe={recipe.name} config={echo}\n")
            w = csv.writer(fh)
            w.writerow([recipe.x_label, ycol, "stderr"])
            for row in zip(c.x, c.y, c.err):
                w.writerow(row)
        tmp.replace(path)
        paths.append(path)
    svg = out_dir / f"{recipe.name}.svg"
    svg.write_text(render_svg(recipe, data))
    paths.append(svg)
    return paths


# minimal SVG ------------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def render_svg(recipe: Recipe, data: list[CurveData], width: int = 640, height: int = 420) -> str:
    left, right, top, bottom = 70, 180, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [x for c in data for x, y in zip(c.x, c.y) if math.isfinite(y)]
    lows, highs = [], []
    for c in data:
        for y, e in zip(c.y, c.err):
            if not math.isfinite(y):
                continue
            lo = y - e
            if recipe.log_y and lo <= 0:
                lo = y
            if not recipe.log_y or lo > 0:
                lows.append(lo)
            highs.append(y + e)
    if not xs or not lows:
        xs, lows, highs = [0.0, 1.0], [1e-3 if recipe.log_y else 0.0], [1.0]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if recipe.log_y:
        y0, y1 = math.log10(min(lows)), math.log10(max(highs))
    else:
        y0, y1 = min(lows), max(highs)
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def tx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def ty(y):
        v = math.log10(y) if recipe.log_y else y
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="18">{html.escape(recipe.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{html.escape(recipe.x_label)}</text>',
        f'<text x="16" y="{top + ph / 2}" transform="rotate(-90 16 {top + ph / 2})" text-anchor="middle">'
        f'{"log10 " if recipe.log_y else ""}{"p_th" if not recipe.log_y and recipe.x_label.startswith("sigma") else "p_fail"}</text>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        parts.append(f'<text x="{tx(xv):.1f}" y="{top + ph + 15}" text-anchor="middle">{xv:.3g}</text>')
        ypix = top + (1 - k / 4) * ph
        parts.append(f'<text x="{left - 5}" y="{ypix + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    for i, c in enumerate(data):
        color = _COLORS[i % len(_COLORS)]
        pts = [(x, y, e) for x, y, e in zip(c.x, c.y, c.err) if math.isfinite(y) and (y > 0 or not recipe.log_y)]
        if len(pts) > 1:
            path = " ".join(f"{tx(x):.1f},{ty(y):.1f}" for x, y, _ in pts)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}"/>')
        for x, y, e in pts:
            lo = y - e if (not recipe.log_y or y - e > 0) else y
            parts.append(f'<line x1="{tx(x):.1f}" x2="{tx(x):.1f}" y1="{ty(lo):.1f}" y2="{ty(y + e):.1f}" stroke="{color}"/>')
            parts.append(f'<circle cx="{tx(x):.1f}" cy="{ty(y):.1f}" r="3" fill="{color}"/>')
        ly = top + 12 + 14 * i
        parts.append(f'<rect x="{left + pw + 10}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{left + pw + 24}" y="{ly + 1}">{html.escape(c.label)}</text>')
    parts.append("</svg>\n")
    return "\n".join(parts)
