"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import glob
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import jsonschema
import numpy as np
import yaml

from . import __version__
from .codes import CodeFamily
from .decoder import MetricKind, WeightMetric
from .experiments import ExperimentSpec, SweepResult, ThresholdFitError, fit_threshold, run_sweep
from .geometry import Layout
from .noise import NoiseKind, NoiseSpec, PairKind
from .recipes import RECIPES, MissingResults, build_recipe, curves, load_results, slug, write_curves

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_NONNEG = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "out": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "trials": {"type": "integer", "minimum": 1},
        "figure": {"enum": list(RECIPES)},
        "experiments": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["family", "lattices", "p", "trials"],
                "properties": {
                    "name": {"type": "string"},
                    "family": {"enum": [f.value for f in CodeFamily if f is not CodeFamily.CUSTOM]},
                    "layout": {"enum": [l.value for l in Layout]},
                    "lattices": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "oneOf": [
                                {"type": "integer", "minimum": 2},
                                {"type": "array", "items": {"type": "integer", "minimum": 2},
                                 "minItems": 2, "maxItems": 2},
                            ]
                        },
                    },
                    "p": {
                        "oneOf": [
                            {"type": "array", "items": _PROB, "minItems": 1},
                            _PROB,
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["start", "stop", "num"],
                                "properties": {"start": _PROB, "stop": _PROB,
                                               "num": {"type": "integer", "minimum": 1}},
                            },
                        ]
                    },
                    "trials": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                    "metric": {
                        "oneOf": [
                            {"enum": [k.value for k in MetricKind] + ["degeneracy_literal"]},
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["name"],
                                "properties": {
                                    "name": {"enum": [k.value for k in MetricKind] + ["degeneracy_literal"]},
                                    "wx": _NONNEG, "wz": _NONNEG, "p1": _PROB, "p2": _PROB,
                                },
                            },
                        ]
                    },
                    "noise": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "kind": {"enum": [k.value for k in NoiseKind]},
                            "bias": {"type": "array", "items": _NONNEG, "minItems": 3, "maxItems": 3},
                            "sigma_p": _NONNEG,
                            "sigma_tot": _NONNEG,
                            "toy_ratios": {"type": "array", "items": _NONNEG, "minItems": 3, "maxItems": 3},
                            "pairs": {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["kind"],
                                "properties": {
                                    "kind": {"enum": [k.value for k in PairKind]},
                                    "p1_fraction": _PROB,
                                    "p2": _PROB,
                                    "pxx": _PROB,
                                    "neighbours": {"type": "integer", "minimum": 1},
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(x) for x in err.absolute_path) or "<root>"


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    if not cfg.get("experiments") and not cfg.get("figure"):
        raise ConfigError("config needs 'experiments' or 'figure'")
    for i, exp in enumerate(cfg.get("experiments", [])):
        try:
            experiment_from_dict(exp, cfg.get("seed", 0))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"experiments/{i}: {exc}") from exc


def _p_grid(value) -> tuple[float, ...]:
    if isinstance(value, dict):
        return tuple(float(round(v, 9)) for v in np.linspace(value["start"], value["stop"], value["num"]))
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


def _metric(value) -> WeightMetric:
    if value is None:
        return WeightMetric.manhattan()
    if isinstance(value, str):
        return WeightMetric.from_name(value)
    base = WeightMetric.from_name(value["name"])
    return replace(base, **{k: v for k, v in value.items() if k != "name"})


def _noise(value: dict | None) -> NoiseSpec:
    value = dict(value or {})
    pairs = value.pop("pairs", None)
    kw = {"kind": value.get("kind", "iid")}
    for key in ("sigma_p", "sigma_tot"):
        if key in value:
            kw[key] = float(value[key])
    for key in ("bias", "toy_ratios"):
        if key in value:
            kw[key] = tuple(float(v) for v in value[key])
    if "bias" in kw and not np.isclose(sum(kw["bias"]), 1.0):
        raise ValueError("noise.bias must sum to 1")
    if pairs:
        kw["pair_kind"] = pairs["kind"]
        if "p1_fraction" in pairs:
            kw["p1_fraction"] = float(pairs["p1_fraction"])
        elif "p2" in pairs:
            kw["p2"] = float(pairs["p2"])
        else:
            raise ValueError("noise.pairs needs p1_fraction or p2")
        kw["pxx"] = float(pairs.get("pxx", 0.5))
        kw["pair_neighbours"] = int(pairs.get("neighbours", 4))
    return NoiseSpec(**kw)


def experiment_from_dict(exp: dict, default_seed: int = 0) -> ExperimentSpec:
    lattices = tuple((x, x) if isinstance(x, int) else tuple(x) for x in exp["lattices"])
    return ExperimentSpec(
        family=CodeFamily(exp["family"]),
        lattices=lattices,
        noise=_noise(exp.get("noise")),
        metric=_metric(exp.get("metric")),
        p_grid=_p_grid(exp["p"]),
        trials=int(exp["trials"]),
        master_seed=int(exp.get("seed", default_seed)),
        layout=Layout(exp.get("layout", Layout.NON_ROTATED.value)),
    )


def resolve_specs(cfg: dict, seed: int | None = None, trials: int | None = None) -> list[tuple[str, ExperimentSpec]]:
    base_seed = cfg.get("seed", 0) if seed is None else seed
    out = []
    for i, exp in enumerate(cfg.get("experiments", [])):
        spec = experiment_from_dict(exp, base_seed)
        if seed is not None:
            spec = replace(spec, master_seed=seed)
        if trials is not None:
            spec = replace(spec, trials=trials)
        out.append((exp.get("name") or f"exp{i}", spec))
    if cfg.get("figure"):
        recipe = build_recipe(cfg["figure"], trials or cfg.get("trials"), base_seed)
        for j, spec in enumerate(_unique(recipe.specs())):
            out.append((f"{recipe.name}_{j:02d}", spec))
    return out


def _unique(specs):
    seen, out = set(), []
    for s in specs:
        key = json.dumps(s.to_dict(), sort_keys=True)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


def _fail(code: int, msg: str):
    click.echo(msg, err=True)
    sys.exit(code)


@click.group()
@click.version_option(__version__)
def main():
    """Tailored surface-code simulations."""


@main.command("validate-config")
@click.option("--config", "config_path", required=True, type=click.Path())
def validate_config_cmd(config_path):
    """Check a run config against the schema."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    n = len(resolve_specs(cfg))
    click.echo(f"ok: {n} experiment(s)")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.option("--workers", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Override every master seed.")
@click.option("--trials-override", type=int, default=None, help="Override trials per point.")
def simulate(config_path, out_dir, workers, seed, trials_override):
    """Run every experiment of a config and write CSV + JSON results."""
    try:
        cfg = load_config(config_path)
        if trials_override is not None and trials_override < 1:
            raise ConfigError("--trials-override must be >= 1")
        if workers is not None and workers < 1:
            raise ConfigError("--workers must be >= 1")
        specs = resolve_specs(cfg, seed, trials_override)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    out = Path(out_dir or cfg.get("out", "results"))
    workers = workers or cfg.get("workers", 1)
    echo = {"config": cfg, "config_path": str(config_path), "seed_override": seed,
            "trials_override": trials_override}
    click.echo(f"{'experiment':<24} {'d1':>3} {'d2':>3} {'p':>8} {'trials':>8} {'p_fail':>10} {'stderr':>9}")
    try:
        for name, spec in specs:
            result = run_sweep(spec, workers=workers)
            result.metadata["run"] = echo
            result.metadata["name"] = name
            base = out / slug(name)
            result.to_csv(base.with_suffix(".csv"))
            result.write_manifest(base.with_suffix(".json"))
            for pt in result:
                click.echo(f"{name:<24} {pt.d1:>3} {pt.d2:>3} {pt.p:>8.4g} {pt.trials:>8} "
                           f"{pt.p_fail:>10.5f} {pt.stderr:>9.5f}")
    except KeyboardInterrupt:
        _fail(EXIT_RUNTIME, "interrupted; completed experiments were written")
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        _fail(EXIT_RUNTIME, f"simulation failed: {exc}")


@main.command()
@click.argument("results", nargs=-1, required=True)
@click.option("--window", nargs=2, type=float, default=None, help="Fit window: low high.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Fit JSON path.")
def threshold(results, window, out_path):
    """Fit a threshold to result CSVs (paths or glob patterns)."""
    paths = sorted({p for pattern in results for p in (glob.glob(pattern) or [pattern])})
    try:
        parts = [SweepResult.from_csv(p) for p in paths]
    except (OSError, KeyError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"cannot read results: {exc}")
    merged = SweepResult.merge(parts)
    try:
        fit = fit_threshold(merged, tuple(window) if window else None)
    except ThresholdFitError as exc:
        _fail(EXIT_RUNTIME, f"insufficient data for a threshold fit: {exc}")
    click.echo(f"p_th = {fit.p_th:.5f} +- {fit.p_th_stderr:.5f}")
    click.echo(f"nu   = {fit.nu:.4f} +- {fit.nu_stderr:.4f}")
    click.echo(f"chi2 = {fit.chi2:.2f} (dof {fit.dof}), distances {list(fit.distances)}")
    report = {**fit.to_dict(), "inputs": paths}
    target = Path(out_path) if out_path else Path(paths[0]).with_name("threshold_fit.json")
    target.write_text(json.dumps(report, indent=2))


@main.command()
@click.argument("recipe", type=click.Choice(RECIPES))
@click.option("--results", "results_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0, help="Seed the recipe's sweeps were run with.")
@click.option("--trials-override", type=int, default=None, help="Trials the recipe's sweeps were run with.")
def figure(recipe, results_dir, out_dir, seed, trials_override):
    """Emit curve data and an SVG for a figure recipe from stored CSVs."""
    rec = build_recipe(recipe, trials_override, seed)
    points = load_results(results_dir)
    try:
        data = curves(rec, points)
    except MissingResults as exc:
        _fail(EXIT_RUNTIME, f"{recipe}: {exc}")
    echo = {"recipe": recipe, "results": str(results_dir), "seed": seed}
    for path in write_curves(rec, data, out_dir or Path(results_dir) / "figures", echo):
        click.echo(str(path))


if __name__ == "__main__":
    main()
