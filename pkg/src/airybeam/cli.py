"""Command-line front end: ``airybeam {design,propagate,trajectory,sweep} --config FILE``.

Exit codes: 0 success, 1 input error, 2 infeasible design, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import analytic, design as design_mod, evaluation
from .errors import (AliasingWarning, ConfigurationError, DegenerateChannelError, GeometryError,
                     InfeasibleDesignError, OracleError)
from .numerics import ComplexField
from .phase import AiryParams, ApertureWindow, airy_weights
from .propagation import (PropagationSettings, inject_weights, propagate_blocked,
                          write_field_dump)
from .scenario import (ArraySpec, BlockageSpec, GridSettings, Scenario, blockage_ratio,
                       element_positions, simulation_grid, wavelength_from_frequency)

log = logging.getLogger("airybeam")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_RANGE = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_ARRAY = _obj({
    "kind": {"enum": ["ULA", "UPA", "ula", "upa"]},
    "counts": {"oneOf": [{"type": "integer", "minimum": 1},
                         {"type": "array", "items": {"type": "integer", "minimum": 1},
                          "minItems": 2, "maxItems": 2}]},
    "pitch": _POS,
    "pitch_wavelengths": _POS,
    "center": _VEC3,
}, ["kind", "counts"])

_BLOCKAGE = _obj({
    "type": {"enum": ["half-plane", "corner", "box"]},
    "z_b": _POS,
    "edge": _NUM, "side": {"enum": ["below", "above"]},
    "x_edge": _NUM, "y_edge": _NUM,
    "x_range": _RANGE, "y_range": _RANGE,
    "alpha": {"type": "number", "minimum": 0, "maximum": 1},
}, ["type", "z_b"])

_PARAMS = _obj({"B": _NUM, "F": {"type": ["number", "null"]}, "theta": _NUM}, ["B", "theta"])

_SPAN = {"oneOf": [_RANGE, _obj({"start": _NUM, "stop": _NUM, "step": _POS},
                                ["start", "stop", "step"])]}

CONFIG_SCHEMA = _obj({
    "scenario": _obj({
        "frequency_hz": _POS,
        "wavelength": _POS,
        "distance": _POS,
        "tx": _ARRAY,
        "rx": _ARRAY,
        "blockages": {"type": "array", "items": _BLOCKAGE},
        "grid": _obj({"pitch": _POS, "span": _POS}),
    }, ["distance", "tx", "rx"]),
    "propagation": _obj({
        "dz": _POS, "padding": {"type": "integer", "minimum": 1},
        "evanescent": {"enum": ["zero", "decay"]}, "band_limit": {"type": "boolean"},
    }),
    "design": _obj({
        "margin": {"oneOf": [{"type": "number", "minimum": 0}, _RANGE]},
        "mode": {"enum": ["mode1", "mode2"]},
        "params": _obj({"x": _PARAMS, "y": _PARAMS}, ["x"]),
        "weights": _obj({"re": {"type": "array", "items": _NUM},
                         "im": {"type": "array", "items": _NUM}}, ["re", "im"]),
        "window": _obj({"kind": {"enum": ["rect", "gaussian"]},
                        "waist": {"oneOf": [_POS, _RANGE]}}, ["kind"]),
    }),
    "eval": _obj({
        "rho": _POS,
        "schemes": {"type": "array", "items": {"enum": list(evaluation.SCHEMES)}},
        "grids": _obj({"B": _SPAN, "F": _SPAN, "theta": _SPAN}),
        "family": _obj({
            "z_b": {"type": "array", "items": _POS},
            "edges": {"type": "array", "items": _NUM},
            "ratios": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
            "side": {"enum": ["below", "above"]},
            "d_py": _NUM,
            "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        }, ["z_b"]),
        "cache": {"type": "boolean"},
    }),
    "output": _obj({
        "directory": {"type": "string"},
        "slices": {"type": "array", "items": _POS},
        "lobes": {"type": "array", "items": {"enum": [0, 1, 2]}},
        "z": _obj({"start": _POS, "stop": _POS, "count": {"type": "integer", "minimum": 1}},
                  ["start", "stop", "count"]),
        "formats": {"type": "array", "items": {"enum": ["dump", "csv"]}},
    }),
}, ["scenario"])


# --------------------------------------------------------------------------
# output formatting
# --------------------------------------------------------------------------

def fmt(v) -> str:
    """Float text with 17 significant digits (exact round trip)."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def to_json(obj) -> str:
    """JSON text with 17-digit floats; non-finite floats become strings."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else json.dumps(fmt(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


# --------------------------------------------------------------------------
# config -> objects
# --------------------------------------------------------------------------

def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def _array(spec: dict, wavelength: float, default_z: float = 0.0) -> ArraySpec:
    if "pitch" in spec:
        pitch = spec["pitch"]
    else:
        pitch = spec.get("pitch_wavelengths", 0.5) * wavelength
    center = tuple(spec.get("center", (0.0, 0.0, default_z)))
    return ArraySpec(spec["kind"], spec["counts"], pitch, center)


def _blockage(b: dict) -> BlockageSpec:
    alpha = b.get("alpha", 0.0)
    kind = b["type"]
    try:
        if kind == "half-plane":
            return BlockageSpec.half_plane(b["z_b"], b["edge"], b.get("side", "below"), alpha)
        if kind == "corner":
            return BlockageSpec.corner(b["z_b"], b["x_edge"], b["y_edge"], alpha)
        return BlockageSpec(b["z_b"], tuple(b["x_range"]),
                            tuple(b.get("y_range", (-math.inf, math.inf))), alpha)
    except KeyError as exc:
        raise GeometryError(f"{kind} obstacle needs field {exc}") from None


def build_scenario(cfg: dict) -> Scenario:
    sc = cfg["scenario"]
    if "wavelength" in sc:
        lam = sc["wavelength"]
    elif "frequency_hz" in sc:
        lam = wavelength_from_frequency(sc["frequency_hz"])
    else:
        raise GeometryError("scenario needs wavelength or frequency_hz")
    prop = PropagationSettings(**{"band_limit": True, **cfg.get("propagation", {})})
    D = sc["distance"]
    return Scenario(_array(sc["tx"], lam), _array(sc["rx"], lam, D), D, lam,
                    tuple(_blockage(b) for b in sc.get("blockages", [])),
                    GridSettings(**sc.get("grid", {})), prop)


def _params(d: dict) -> AiryParams:
    F = d.get("F")
    return AiryParams(d["B"], math.inf if F is None else F, d["theta"])


def _margin(cfg: dict):
    m = cfg.get("design", {}).get("margin")
    return tuple(m) if isinstance(m, list) else m


def _out_dir(args, cfg: dict) -> Path:
    d = args.out or cfg.get("output", {}).get("directory") or "."
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _solve(s: Scenario, cfg: dict) -> design_mod.DesignSolution:
    mode = cfg.get("design", {}).get("mode")
    return design_mod.design(s, mode, _margin(cfg))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_design(args, cfg: dict) -> int:
    s = build_scenario(cfg)
    sol = _solve(s, cfg)
    d = sol.to_dict()
    if s.blockages:
        d["R_bl"] = blockage_ratio(s)
    text = to_json(d)
    print(text)
    (_out_dir(args, cfg) / "design.json").write_text(text + "\n")
    return EXIT_OK


def _tx_weights(s: Scenario, cfg: dict) -> tuple[np.ndarray, design_mod.DesignSolution | None]:
    dcfg = cfg.get("design", {})
    win = dcfg.get("window", {"kind": "rect"})
    waist = win.get("waist")
    window = ApertureWindow(win["kind"], tuple(waist) if isinstance(waist, list) else waist)
    if "weights" in dcfg:
        w = np.asarray(dcfg["weights"]["re"], float) + 1j * np.asarray(dcfg["weights"]["im"], float)
        if w.size != s.tx.n_elements:
            raise GeometryError(f"expected {s.tx.n_elements} weights, got {w.size}")
        return w, None
    if "params" in dcfg:
        px = _params(dcfg["params"]["x"])
        py = _params(dcfg["params"]["y"]) if "y" in dcfg["params"] else None
        return airy_weights(s.tx, px, s.wavelength, py, window), None
    sol = _solve(s, cfg)
    return airy_weights(s.tx, sol.px, s.wavelength, sol.py, window), sol


def _peak(field: ComplexField) -> tuple:
    I = np.abs(field.values) ** 2
    idx = np.unravel_index(int(np.argmax(I)), I.shape)
    if field.grid.ndim == 1:
        return (field.grid.coords()[idx[0]], float(I[idx]))
    x, y = field.grid.coords()
    return (x[idx[1]], y[idx[0]], float(I[idx]))


def cmd_propagate(args, cfg: dict) -> int:
    """Field dumps at each requested z plus peak / intensity CSV files."""
    s = build_scenario(cfg)
    out = _out_dir(args, cfg)
    w, _ = _tx_weights(s, cfg)
    grid = simulation_grid(s)
    src = inject_weights(grid, element_positions(s.tx), w, s.tx.center[2], s.wavelength)
    slices = cfg.get("output", {}).get("slices")
    if not slices:
        slices = sorted({b.z_b for b in s.blockages} | {s.distance})
    slices = sorted(slices)
    formats = cfg.get("output", {}).get("formats", ["dump", "csv"])
    peaks, profile = [], []
    field = src
    with warnings.catch_warnings():
        if not args.verbose:
            warnings.simplefilter("ignore", AliasingWarning)
        for i, z in enumerate(slices):
            if z > field.z:
                field = propagate_blocked(field, z, s)[-1]
            if "dump" in formats:
                write_field_dump(out / f"field_{i:03d}.bin", field)
            peaks.append((z,) + _peak(field))
            if grid.ndim == 1 and "csv" in formats:
                I = np.abs(field.values) ** 2
                profile.extend((z, xv, iv) for xv, iv in zip(grid.coords(), I))
    if grid.ndim == 1:
        _write_csv(out / "peaks.csv", ["z", "x", "intensity"], peaks)
        if "csv" in formats:
            _write_csv(out / "intensity.csv", ["z", "x", "intensity"], profile)
    else:
        _write_csv(out / "peaks.csv", ["z", "x", "y", "intensity"], peaks)
    log.info("wrote %d slices to %s", len(slices), out)
    return EXIT_OK


def cmd_trajectory(args, cfg: dict) -> int:
    """CSV of lobe positions ``z, x[, y], lobe`` from explicit params or a design."""
    ocfg = cfg.get("output", {})
    lobes = ocfg.get("lobes", [0, 1, 2])
    dcfg = cfg.get("design", {})
    s = build_scenario(cfg)
    if "params" in dcfg:
        px = _params(dcfg["params"]["x"])
        py = _params(dcfg["params"]["y"]) if "y" in dcfg["params"] else None
        ctx = analytic.AnalyticContext.for_array(s.tx, s.wavelength)
        valid = None
        origin = s.tx.center[:2]
    else:
        sol = _solve(s, cfg)
        px, py, ctx = sol.px, sol.py, sol.ctx
        valid = sol.validity_interval()
        origin = sol.anchors.origin if sol.anchors is not None else s.tx.center[:2]
    zc = ocfg.get("z")
    if zc is None:
        lo, hi = valid if valid is not None else (0.05 * s.distance, s.distance)
        zc = {"start": lo, "stop": hi, "count": 201}
    z = np.linspace(zc["start"], zc["stop"], zc["count"])
    upa = s.kind == "UPA"
    rows = []
    for lobe in lobes:
        x = origin[0] + analytic.trajectory_ula(z, px, ctx, lobe, valid, "x")
        if upa:
            y = origin[1] + analytic.trajectory_ula(z, py or AiryParams.steering(0.0), ctx, lobe,
                                                    valid, "y")
            rows.extend((zi, xi, yi, lobe) for zi, xi, yi in zip(z, x, y))
        else:
            rows.extend((zi, xi, lobe) for zi, xi in zip(z, x))
    header = ["z", "x", "y", "lobe"] if upa else ["z", "x", "lobe"]
    out = _out_dir(args, cfg) / "trajectory.csv"
    _write_csv(out, header, rows)
    if args.verbose:
        print(out)
    return EXIT_OK


def _span(v, default):
    if v is None:
        return default
    if isinstance(v, dict):
        n = int(math.floor((v["stop"] - v["start"]) / v["step"] + 1e-9)) + 1
        return tuple(np.round(v["start"] + v["step"] * np.arange(n), 12))
    return tuple(v)


def cmd_sweep(args, cfg: dict) -> int:
    s = build_scenario(cfg)
    ecfg = cfg.get("eval", {})
    fam_cfg = ecfg.get("family", {"z_b": []})
    family = evaluation.SweepFamily(
        s.unblocked(), tuple(fam_cfg.get("z_b", ())),
        edges=tuple(fam_cfg["edges"]) if "edges" in fam_cfg else None,
        ratios=tuple(fam_cfg["ratios"]) if "ratios" in fam_cfg else (
            None if "edges" in fam_cfg else ()),
        side=fam_cfg.get("side", "below"), d_py=fam_cfg.get("d_py", 0.1),
        alpha=fam_cfg.get("alpha", 0.0))
    g = ecfg.get("grids", {})
    dflt = evaluation.SearchGrids()
    grids = evaluation.SearchGrids(_span(g.get("B"), dflt.B), _span(g.get("F"), dflt.F),
                                   _span(g.get("theta"), dflt.theta))
    default_schemes = [sc for sc in evaluation.SCHEMES
                       if s.kind == "UPA" or not sc.startswith("upa-")]
    schemes = ecfg.get("schemes", default_schemes)
    out = _out_dir(args, cfg)
    cache = out / "cache" if ecfg.get("cache", True) else None
    rows = evaluation.sweep(family, schemes, evaluation.LinkBudget(ecfg.get("rho", 1e4)),
                            grids, cache, args.jobs)
    evaluation.rows_to_csv(rows, out / "sweep.csv")
    if args.verbose:
        print(out / "sweep.csv")
    return EXIT_OK


COMMANDS = {"design": cmd_design, "propagate": cmd_propagate,
            "trajectory": cmd_trajectory, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="airybeam", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--verbose", action="store_true")
    return p


def _fail(code: int, kind: str, exc: BaseException) -> int:
    print(to_json({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        return _fail(EXIT_INPUT, "input", ValueError("--jobs must be >= 1"))
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except InfeasibleDesignError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible-design", exc)
    except (OracleError, DegenerateChannelError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", exc)
    except json.JSONDecodeError as exc:
        return _fail(EXIT_INPUT, "parse", exc)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        return _fail(EXIT_INPUT, "schema", ValueError(f"{where}: {exc.message}"))
    except (OSError, ValueError, TypeError, KeyError, ConfigurationError) as exc:
        # configuration, geometry and domain errors are ValueError subclasses
        return _fail(EXIT_INPUT, "input", exc)
    except Exception as exc:       # noqa: BLE001 - last-resort numerical failure
        log.debug("unexpected failure", exc_info=True)
        return _fail(EXIT_NUMERIC, "numerical", exc)


if __name__ == "__main__":
    sys.exit(main())
