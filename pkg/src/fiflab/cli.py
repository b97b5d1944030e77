"""Command-line pipelines over interpolation-system spec files.

Verbs: validate, render, dimension, measure, fracint, report.  Every
command is deterministic given its flags and seed.  Exit codes: 0 success,
1 domain violation, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import core, dimension, fracint, measures, serialize
from .errors import DataValidationError, FifError

_CONFIG_KEYS = ("grid", "tol", "samples", "seed", "beta", "sigma", "alpha", "deltas")


@dataclass
class RunConfig:
    spec: Path
    out: Path
    grid: int = 8192
    tol: float = 1e-9
    samples: int = 100_000
    seed: int = 0
    burn_in: int = 64
    beta: float | None = None
    sigma: float | None = None
    alpha: float | None = None
    deltas: tuple = (3, 11)


def _parse_deltas(text: str) -> tuple:
    lo, _, hi = text.partition("..")
    j0, j1 = int(lo), int(hi)
    if j1 <= j0:
        raise ValueError(f"bad deltas range {text!r}")
    return (j0, j1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fiflab",
        description="fractal interpolation pipelines: validate, render, "
        "estimate dimensions, sample measures, fractional integrals",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("validate", "render", "dimension", "measure", "fracint", "report"):
        p = sub.add_parser(verb)
        p.add_argument("--spec", required=True, help="system spec JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--config", default=None, help="JSON config file; flags override")
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--deltas", type=str, default=None, help="dyadic ladder, e.g. 3..11")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig(spec=Path(args.spec), out=Path(args.out))
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        for key in _CONFIG_KEYS:
            if key in file_cfg:
                value = file_cfg[key]
                setattr(cfg, key, _parse_deltas(value) if key == "deltas" else value)
    for key in _CONFIG_KEYS:
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, _parse_deltas(value) if key == "deltas" else value)
    for name in ("grid", "tol", "samples"):
        if getattr(cfg, name) <= 0:
            raise ValueError(f"{name} must be positive")
    return cfg


def _load_spec_dict(cfg: RunConfig) -> dict:
    with open(cfg.spec, encoding="utf-8") as fh:
        spec = json.load(fh)
    schema = json.loads(
        resources.files("fiflab.schemas").joinpath("system.schema.json").read_text()
    )
    jsonschema.validate(spec, schema)
    return spec


def _probability_vector(system, probs):
    if probs is None:
        return measures.ProbabilityVector.uniform(len(system.branches))
    return measures.ProbabilityVector(np.asarray(probs, dtype=float))


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> int:
    spec = _load_spec_dict(cfg)
    try:
        system, _ = serialize.system_from_dict(spec, strict=False)
        report = core.validate_system(system)
        payload = report.to_dict()
    except DataValidationError as exc:
        payload = {
            "valid": False,
            "violations": [
                {"kind": "data", "branch": None, "magnitude": 0.0, "detail": str(exc)}
            ],
        }
    serialize.dump_json(payload, cfg.out / "validation.json")
    return 0 if payload["valid"] else 1


def _render(cfg: RunConfig):
    system, probs = serialize.system_from_dict(_load_spec_dict(cfg))
    sample = core.evaluate_fif(system, grid_size=cfg.grid, tol=cfg.tol)
    return system, probs, sample


def cmd_render(cfg: RunConfig) -> int:
    system, _, sample = _render(cfg)
    serialize.sample_to_csv(sample, cfg.out / "graph.csv")
    print(
        f"render: {sample.size} grid points, {sample.iterations} iterations, "
        f"residual {sample.residual:.3g}",
        file=sys.stderr,
    )
    return 0


def _dimension_payload(cfg: RunConfig, system, sample) -> dict:
    ladder = dimension.default_scales(system.data.span, *cfg.deltas)
    mesh = dimension.box_count_mesh(sample.points(), ladder)
    osc = [
        dimension.box_count_oscillation(sample, ladder, component=i)
        for i in range(sample.dimension)
    ]
    ratios = core.contraction_ratios(system)
    bounds = {
        "moran_lower": None
        if ratios.any_degenerate
        else dimension.moran_solve(ratios.lower).s,
        "moran_upper": dimension.moran_solve(ratios.upper).s,
        "two_minus_sigma": None,
        "cap": None,
    }
    notes = []
    if ratios.any_degenerate:
        notes.append("zero scaling on some branch: lower Moran bound omitted")
    if cfg.sigma is not None:
        predicates = dimension.space_predicates(system, cfg.sigma, sample=sample)
        if predicates.holder:
            bounds["two_minus_sigma"] = 2.0 - cfg.sigma
        else:
            notes.append("holder predicate fails at the requested exponent")
    if cfg.alpha is not None:
        if system.data.dimension == 1:
            bounds["cap"] = dimension.upper_box_cap(system, cfg.alpha)
        else:
            notes.append("oscillation-space cap applies to real-valued systems only")
    payload = {
        "mesh": mesh.to_dict(),
        "oscillation": [r.to_dict() for r in osc],
        "bounds": bounds,
    }
    if notes:
        payload["notes"] = notes
    return payload


def cmd_dimension(cfg: RunConfig) -> int:
    system, _, sample = _render(cfg)
    serialize.dump_json(_dimension_payload(cfg, system, sample), cfg.out / "dimension.json")
    return 0


def _measure_payload(cfg: RunConfig, system, probs):
    p = _probability_vector(system, probs)
    cloud = measures.chaos_game(system, p, cfg.samples, burn_in=cfg.burn_in, seed=cfg.seed)
    bounds = measures.measure_dim_bounds(system, p)
    radii = measures.default_radii(cloud, 3, 10)
    centers = cloud.points()[np.linspace(0, cloud.n - 1, 32, dtype=int)]
    local = measures.local_dimension(cloud, centers, radii)
    payload = bounds.to_dict()
    payload["local_dim_median"] = local.median
    payload["fit_r2"] = float(np.nanmedian(local.r2))
    payload["samples"] = cloud.n
    payload["seed"] = cfg.seed
    payload["burn_in"] = cfg.burn_in
    payload["notes"] = list(payload["notes"]) + list(local.notes)
    return payload, cloud


def cmd_measure(cfg: RunConfig) -> int:
    system, probs = serialize.system_from_dict(_load_spec_dict(cfg))
    payload, cloud = _measure_payload(cfg, system, probs)
    serialize.measure_to_csv(cloud, cfg.out / "measure.csv")
    serialize.dump_json(payload, cfg.out / "measure.json")
    return 0


def _fracint_payload(cfg: RunConfig, system, sample):
    beta = cfg.beta if cfg.beta is not None else 0.5
    derived = fracint.derive_fractional_ifs(system, beta, sample)
    integral = fracint.rl_integral(sample, beta)
    check = fracint.verify_fractional_identity(derived, integral)
    payload = serialize.fracint_to_dict(derived)
    payload["identity_residual"] = check.residual
    payload["quadrature_budget"] = check.budget
    return payload, integral, check


def cmd_fracint(cfg: RunConfig) -> int:
    system, _, sample = _render(cfg)
    payload, integral, check = _fracint_payload(cfg, system, sample)
    serialize.sample_to_csv(integral, cfg.out / "fracint.csv")
    serialize.dump_json(payload, cfg.out / "fracint.json")
    print(
        f"fracint: identity residual {check.residual:.3g} "
        f"(budget {check.budget:.3g})",
        file=sys.stderr,
    )
    return 0


def cmd_report(cfg: RunConfig) -> int:
    from . import figures

    system, probs, sample = _render(cfg)
    out = cfg.out
    files = {"graph_csv": "graph.csv", "measure_csv": "measure.csv"}
    serialize.sample_to_csv(sample, out / "graph.csv")

    dim_payload = _dimension_payload(cfg, system, sample)
    serialize.dump_json(dim_payload, out / "dimension.json")
    files["dimension_json"] = "dimension.json"

    measure_payload, cloud = _measure_payload(cfg, system, probs)
    serialize.measure_to_csv(cloud, out / "measure.csv")
    serialize.dump_json(measure_payload, out / "measure.json")
    files["measure_json"] = "measure.json"

    figure_names = ["graph.png", "dimension.png", "measure.png"]
    figures.save_graph_figure(sample, system.data.knots, system.data.values, out / "graph.png")
    mesh = dimension.box_count_mesh(
        sample.points(), dimension.default_scales(system.data.span, *cfg.deltas)
    )
    figures.save_dimension_figure(mesh, dim_payload["bounds"], out / "dimension.png")
    figures.save_measure_figure(cloud, out / "measure.png")

    frac_payload = None
    if cfg.beta is not None:
        frac_payload, integral, _ = _fracint_payload(cfg, system, sample)
        serialize.sample_to_csv(integral, out / "fracint.csv")
        serialize.dump_json(frac_payload, out / "fracint.json")
        files["fracint_json"] = "fracint.json"
        files["fracint_csv"] = "fracint.csv"
        figures.save_fracint_figure(sample, integral, cfg.beta, out / "fracint.png")
        figure_names.append("fracint.png")

    report = {
        "system": {
            "knots": system.data.count,
            "branches": len(system.branches),
            "codomain_dimension": system.data.dimension,
            "scaling_max": system.scaling_max,
        },
        "render": {
            "residual": sample.residual,
            "iterations": sample.iterations,
            "grid_points": sample.size,
        },
        "dimension": dim_payload,
        "measure": measure_payload,
        "fracint": frac_payload,
        "figures": figure_names,
        "files": files,
    }
    serialize.dump_json(report, out / "report.json")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "render": cmd_render,
    "dimension": cmd_dimension,
    "measure": cmd_measure,
    "fracint": cmd_fracint,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"fiflab: input error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except FifError as exc:
        print(f"fiflab: {exc}", file=sys.stderr)
        return 1
    except jsonschema.ValidationError as exc:
        print(f"fiflab: input error: {exc.message}", file=sys.stderr)
        return 2
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"fiflab: input error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"fiflab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
