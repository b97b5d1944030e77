"""JSON and CSV wire formats.

System JSON: {"knots": [...], "values": [[...]], "alphas": [...],
"forcing": {"kind": ..., "params": {...}}} with an optional
"probabilities" list.  Graph samples go to CSV with header t,h_1,...,h_M;
measures to CSV with header t,z_1,...,z_M.  All writers format floats with
repr and sort JSON keys, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import (
    AffineForcing,
    FifSystem,
    GraphSample,
    InterpolationData,
    PolynomialForcing,
    SampledForcing,
    build_system,
)
from .errors import DataValidationError


def _listify(arr):
    return np.asarray(arr, dtype=float).tolist()


def system_to_dict(system: FifSystem) -> dict:
    data = system.data
    out = {
        "knots": _listify(data.knots),
        "values": _listify(data.values),
        "alphas": _listify(system.scalings),
    }
    kinds = {type(b.forcing) for b in system.branches}
    if kinds == {AffineForcing}:
        out["forcing"] = {"kind": "affine", "params": {}}
    elif kinds == {PolynomialForcing}:
        out["forcing"] = {
            "kind": "polynomial",
            "params": {
                "coefficients": [_listify(b.forcing.coefficients) for b in system.branches]
            },
        }
    elif kinds == {SampledForcing}:
        first = system.branches[0].forcing
        uniform = all(
            b.forcing.is_uniform
            and b.forcing.nodes.size == first.nodes.size
            and np.allclose(b.forcing.nodes, first.nodes)
            for b in system.branches
        )
        if uniform:
            params = {
                "start": float(first.nodes[0]),
                "stop": float(first.nodes[-1]),
                "samples": [_listify(b.forcing.samples) for b in system.branches],
            }
        else:
            params = {
                "nodes": [_listify(b.forcing.nodes) for b in system.branches],
                "samples": [_listify(b.forcing.samples) for b in system.branches],
            }
        out["forcing"] = {"kind": "sampled", "params": params}
    else:
        raise DataValidationError("cannot serialize mixed or unknown forcing kinds")
    return out


def system_from_dict(spec: dict, strict: bool = True) -> tuple[FifSystem, np.ndarray | None]:
    """Build a system from its JSON form; returns (system, probabilities)."""
    data = InterpolationData(spec["knots"], spec["values"])
    alphas = np.asarray(spec["alphas"], dtype=float)
    forcing = spec.get("forcing", {"kind": "affine", "params": {}})
    kind = forcing.get("kind", "affine")
    params = forcing.get("params", {})
    if kind == "affine":
        forcings = None
    elif kind == "polynomial":
        forcings = [PolynomialForcing(c) for c in params["coefficients"]]
    elif kind == "sampled":
        if "nodes" in params:
            forcings = [
                SampledForcing(n, s) for n, s in zip(params["nodes"], params["samples"])
            ]
        else:
            forcings = [
                SampledForcing.uniform(params["start"], params["stop"], s)
                for s in params["samples"]
            ]
    else:
        raise DataValidationError(f"unknown forcing kind {kind!r}")
    system = build_system(data, alphas, forcings, strict=strict)
    probs = spec.get("probabilities")
    return system, None if probs is None else np.asarray(probs, dtype=float)


def load_system(path, strict: bool = True) -> tuple[FifSystem, np.ndarray | None]:
    with open(path, encoding="utf-8") as fh:
        return system_from_dict(json.load(fh), strict=strict)


def dump_json(obj: dict, path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _csv_rows(header, columns) -> str:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def sample_to_csv(sample: GraphSample, path) -> None:
    header = ["t"] + [f"h_{i + 1}" for i in range(sample.dimension)]
    cols = [sample.grid] + [sample.values[:, i] for i in range(sample.dimension)]
    Path(path).write_text(_csv_rows(header, cols), encoding="utf-8")


def measure_to_csv(measure, path) -> None:
    header = ["t"] + [f"z_{i + 1}" for i in range(measure.z.shape[1])]
    cols = [measure.t] + [measure.z[:, i] for i in range(measure.z.shape[1])]
    Path(path).write_text(_csv_rows(header, cols), encoding="utf-8")


def sample_from_csv(path) -> GraphSample:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GraphSample(raw[:, 0], raw[:, 1:])


def fracint_to_dict(fsys) -> dict:
    """Derived-system JSON: a loadable system extended with the fractional
    order, the derived scalings, and the sampled forcing grids."""
    derived = fsys.as_fif_system()
    out = system_to_dict(derived)
    out["beta"] = fsys.beta
    out["derived_alphas"] = _listify(fsys.derived_scalings)
    out["Q"] = {
        "grids": {
            "nodes": _listify(fsys.grid),
            "samples": [_listify(f.samples) for f in fsys.forcings],
        }
    }
    out["endpoint_residual"] = fsys.endpoint_residual
    out["source"] = system_to_dict(fsys.base)
    return out
