"""Command-line front end.

Every subcommand reads one JSON document (inline or from a file) describing a
Schur sequence, optionally wrapped together with a perturbation path, and
writes JSON or CSV.  Floats are written with 17 significant digits so that
output round-trips exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import jsonschema
import numpy as np

from . import opuc, perturbation, reduction, spectral
from .bands import HessMat, build_C, build_H
from .errors import CMVError, ConvergenceError, DomainError, ReducibleError, TrackingError, UsageError
from .krein import krein_conditions
from .opuc import SchurSeq, auto_terminal
from .perturbation import ParamPath, fixed_point_curve, track_mass_point
from .reduction import five_diagonal_reduce
from .spectral import spectrum_finite, szego_quadrature

TOL_ENV = "CMV_TOL"

EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4

COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {"re": {"type": "number"}, "im": {"type": "number"}},
            "required": ["re", "im"],
            "additionalProperties": False,
        },
    ]
}

TERMINAL = {"oneOf": [{"const": "auto"}, {"$ref": "#/$defs/complex"}]}

SEQUENCE = {
    "type": "object",
    "required": ["generator"],
    "properties": {"generator": {"enum": ["constant", "list", "alternating-approach-one", "rotating"]}},
    "allOf": [
        {
            "if": {"properties": {"generator": {"const": "constant"}}},
            "then": {
                "properties": {
                    "generator": True,
                    "a": {"$ref": "#/$defs/complex"},
                    "n": {"type": "integer", "minimum": 1},
                    "terminal": {"$ref": "#/$defs/terminal"},
                },
                "required": ["a"],
                "additionalProperties": False,
            },
        },
        {
            "if": {"properties": {"generator": {"const": "list"}}},
            "then": {
                "properties": {
                    "generator": True,
                    "values": {"type": "array", "items": {"$ref": "#/$defs/complex"}},
                    "terminal": {"$ref": "#/$defs/terminal"},
                },
                "required": ["values"],
                "additionalProperties": False,
            },
        },
        {
            "if": {"properties": {"generator": {"const": "alternating-approach-one"}}},
            "then": {
                "properties": {
                    "generator": True,
                    "n": {"type": "integer", "minimum": 1},
                    "terminal": {"$ref": "#/$defs/terminal"},
                },
                "additionalProperties": False,
            },
        },
        {
            "if": {"properties": {"generator": {"const": "rotating"}}},
            "then": {
                "properties": {
                    "generator": True,
                    "r": {"type": "number"},
                    "omega": {"type": "number"},
                    "n": {"type": "integer", "minimum": 1},
                    "terminal": {"$ref": "#/$defs/terminal"},
                },
                "required": ["r", "omega"],
                "additionalProperties": False,
            },
        },
    ],
}

PATH = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["frozen", "uniform-rotation", "linear"]},
        "rate": {"type": "number"},
        "dr": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]},
        "dalpha": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]},
        "dbeta": {"type": "number"},
        "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
    "additionalProperties": False,
}

MATRIX = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"complex": COMPLEX, "terminal": TERMINAL, "sequence": SEQUENCE, "path": PATH},
    "oneOf": [
        {"$ref": "#/$defs/sequence"},
        {
            "type": "object",
            "properties": {
                "sequence": {"$ref": "#/$defs/sequence"},
                "path": {"$ref": "#/$defs/path"},
                "index": {"type": "integer", "minimum": 1},
                "hessenberg": {"type": "object", "required": ["columns"]},
                "matrix": MATRIX,
            },
            "anyOf": [{"required": ["sequence"]}, {"required": ["hessenberg"]}, {"required": ["matrix"]}],
            "additionalProperties": False,
        },
    ],
}


# input ---------------------------------------------------------------------------


def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else ""


def load_document(text):
    """Parse and validate a JSON document; schema errors name their JSON pointer."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"input is not valid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = list(validator.iter_errors(doc))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise UsageError(f"schema violation at '{_pointer(best.absolute_path)}': {best.message}")
    return doc


def _complex(v):
    if isinstance(v, dict):
        return complex(float(v["re"]), float(v["im"]))
    return complex(float(v))


def _terminal(v):
    return "auto" if v is None or v == "auto" else _complex(v)


def parse_sequence(doc):
    """Build a :class:`SchurSeq` from a sequence document.

    A ``"list"`` with a terminal holds ``a_1 .. a_N``; the last slot is
    overwritten by the explicit terminal, or with ``"terminal": "auto"``
    replaced by ``a_N/|a_N|`` (``1`` if zero).  Without a terminal the list
    is the prefix of an infinite sequence with zero tail.  The other
    generators give infinite sequences, truncated at order ``n`` when ``n``
    is present.
    """
    gen = doc["generator"]
    if gen == "list":
        values = np.array([_complex(v) for v in doc["values"]], dtype=complex)
        if "terminal" not in doc:
            return SchurSeq.infinite(prefix=values)
        if values.size == 0:
            raise UsageError("a finite list needs at least one value (the terminal slot)")
        term = _terminal(doc["terminal"])
        u = auto_terminal(values[-1]) if isinstance(term, str) else term
        return SchurSeq.finite(values[:-1], u)
    if gen == "constant":
        seq = opuc.constant(_complex(doc["a"]))
    elif gen == "alternating-approach-one":
        seq = opuc.alternating_approach_one()
    else:
        seq = opuc.rotating(doc["r"], doc["omega"])
    if "n" in doc:
        return seq.truncate(doc["n"], terminal=_terminal(doc.get("terminal")))
    return seq


def parse_input(doc):
    """``(sequence, extras)`` where ``extras`` holds the wrapper fields other than the sequence."""
    if "generator" in doc:
        return parse_sequence(doc), {}
    extras = {k: v for k, v in doc.items() if k != "sequence"}
    seq = parse_sequence(doc["sequence"]) if "sequence" in doc else None
    return seq, extras


def parse_path(seq, path_doc):
    kind = path_doc["kind"]
    interval = tuple(path_doc.get("interval", (-1.0, 1.0)))
    if kind == "frozen":
        return ParamPath.frozen(seq, interval=interval)
    if kind == "uniform-rotation":
        return ParamPath.uniform_rotation(seq, rate=path_doc.get("rate", 1.0), interval=interval)
    return ParamPath.linear(
        seq,
        np.asarray(path_doc.get("dr", 0.0), dtype=float),
        np.asarray(path_doc.get("dalpha", 0.0), dtype=float),
        path_doc.get("dbeta", 0.0),
        interval=interval,
    )


def _read(source):
    if source is None or source == "-":
        return sys.stdin.read()
    if source.lstrip().startswith(("{", "[")):
        return source
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def _span(text, name):
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--{name} expects a:b, got {text!r}") from None
    return a, b


def _window(text):
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--window expects n0:n1, got {text!r}") from None
    return a, b


def _angles(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--points expects comma-separated angles, got {text!r}") from None


# output --------------------------------------------------------------------------


def _clean(obj):
    """Replace non-finite floats (invalid in JSON) by the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj):
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def dump_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([format(x, ".17g") if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _cpx(z):
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _atoms(measure):
    return [
        {"theta": float(th), "re": float(z.real), "im": float(z.imag), "mass": float(m)}
        for th, z, m in zip(measure.angles, measure.points, measure.masses)
    ]


def _atom_rows(measure):
    yield ["theta", "re", "im", "mass"]
    for atom in _atoms(measure):
        yield [atom["theta"], atom["re"], atom["im"], atom["mass"]]


# subcommands ------------------------------------------------------------------------


def _finite(seq, size):
    if seq is None:
        raise UsageError("this subcommand needs a sequence")
    if seq.is_finite:
        if size is not None and size != seq.order:
            seq = seq.truncate(size)
        return seq
    if size is None:
        raise UsageError("an infinite sequence needs --size N (or 'n' in the document)")
    return seq.truncate(size)


def cmd_build(args, seq, extras):
    seq = _finite(seq, args.size)
    a = seq.coefficients(seq.order)
    if args.format == "csv":
        return dump_csv([["n", "re", "im"]] + [[k, float(z.real), float(z.imag)] for k, z in enumerate(a, 1)])
    return dump_json({
        "order": seq.order,
        "schur": [_cpx(z) for z in a],
        "C": build_C(seq).to_json(),
        "H": build_H(seq).to_json(),
    })


def cmd_spectrum(args, seq, extras):
    measure = spectrum_finite(_finite(seq, args.size))
    if args.format == "csv":
        return dump_csv(_atom_rows(measure))
    return dump_json(_atoms(measure))


def cmd_quadrature(args, seq, extras):
    if seq is None or seq.is_finite:
        raise UsageError("quadrature needs an infinite sequence (omit 'n')")
    if args.size is None:
        raise UsageError("quadrature needs --size N")
    u = args.terminal if args.terminal is not None else auto_terminal(seq.coefficients(args.size)[-1])
    measure = szego_quadrature(seq, args.size, u)
    if args.format == "csv":
        return dump_csv(_atom_rows(measure))
    return dump_json(_atoms(measure))


def cmd_reduce(args, seq, extras):
    if "hessenberg" in extras:
        H = HessMat.from_json(extras["hessenberg"]).to_dense()
    elif "matrix" in extras:
        H = np.array([[complex(re, im) for re, im in row] for row in extras["matrix"]])
    else:
        H = build_H(_finite(seq, args.size)).to_dense()
    res = five_diagonal_reduce(H, strict=not args.lenient)
    if args.format == "csv":
        rows = [["n", "re", "im", "tau_re", "tau_im"]]
        rows += [[k, float(z.real), float(z.imag), float(t.real), float(t.imag)]
                 for k, (z, t) in enumerate(zip(res.schur, res.tau), 1)]
        return dump_csv(rows)
    return dump_json({
        "schur": [_cpx(z) for z in res.schur],
        "tau": [_cpx(z) for z in res.tau],
        "similarity_residual": res.similarity_residual,
        "orthogonality_residual": res.orthogonality_residual,
        "C": res.C.to_json(),
    })


def cmd_krein(args, seq, extras):
    if seq is None:
        raise UsageError("krein-check needs a sequence")
    if args.points is None or args.window is None:
        raise UsageError("krein-check needs --points and --window")
    points = np.exp(1j * np.array(_angles(args.points)))
    report = krein_conditions(seq, points, _window(args.window))
    if args.format == "csv":
        return dump_csv(report.rows())
    return dump_json(report.to_json())


def _path(seq, extras):
    if seq is None or "path" not in extras:
        raise UsageError("this subcommand needs a document with 'sequence' and 'path'")
    return parse_path(seq, extras["path"])


def cmd_track(args, seq, extras):
    path = _path(seq, extras)
    if args.points is None:
        raise UsageError("track needs --points theta0 (starting angle in radians)")
    theta0 = _angles(args.points)[0]
    t_span = _span(args.tspan, "tspan") if args.tspan else (0.0, 1.0)
    track = track_mass_point(path, t_span, theta0, N=args.size, method=args.method)
    header = ["t", "theta", "mass", "dtheta_dt"]
    if args.format == "json":
        return dump_json({"method": track.method, "max_drift": track.max_drift,
                          "samples": [dict(zip(header, row)) for row in track.rows()]})
    return dump_csv([header] + [list(r) for r in track.rows()])


def cmd_fixed_curve(args, seq, extras):
    if seq is None:
        raise UsageError("fixed-curve needs a sequence")
    if "index" not in extras:
        raise UsageError("fixed-curve needs 'index' (the perturbed parameter n) in the document")
    if args.points is None:
        raise UsageError("fixed-curve needs --points theta (the fixed mass point, radians)")
    lam = np.exp(1j * _angles(args.points)[0])
    if seq.is_finite:
        lam = spectral.polish_eigenvalue(seq, lam)[0]
    curve = fixed_point_curve(args.case, seq, extras["index"], lam)
    b = curve.base_alpha
    lo, hi = _span(args.tspan, "tspan") if args.tspan else (-0.2, 0.2)
    alphas, rs = curve.sample(b + lo, b + hi, args.samples)
    if args.format == "csv":
        return dump_csv([["alpha", "r"]] + [[float(x), float(y)] for x, y in zip(alphas, rs)])
    return dump_json({
        "case": curve.case, "n": curve.n, "theta": curve.theta, "xi": curve.xi, "c": curve.c,
        "base_alpha": b, "samples": [{"alpha": float(x), "r": float(y)} for x, y in zip(alphas, rs)],
    })


COMMANDS = {
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "reduce": cmd_reduce,
    "krein-check": cmd_krein,
    "track": cmd_track,
    "fixed-curve": cmd_fixed_curve,
    "quadrature": cmd_quadrature,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cmvkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", "-i", default="-", help="JSON document, a path to one, or '-' for stdin")
        p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
        p.add_argument("--format", "-f", choices=["json", "csv"], default=None)
        p.add_argument("--size", type=int, default=None, help="truncation order N")
        if name == "krein-check":
            p.add_argument("--window", help="index window n0:n1")
        if name in ("krein-check", "track", "fixed-curve"):
            p.add_argument("--points", help="comma-separated angles in radians")
        if name in ("track", "fixed-curve"):
            p.add_argument("--tspan", help="parameter range a:b")
        if name == "track":
            p.add_argument("--method", choices=["formula-ode", "eigen-follow"], default="formula-ode")
        if name == "fixed-curve":
            p.add_argument("--case", type=int, choices=[1, 2, 3], required=True)
            p.add_argument("--samples", type=int, default=20)
        if name == "reduce":
            p.add_argument("--lenient", action="store_true",
                           help="report instead of rejecting a loss of orthogonality")
        if name == "quadrature":
            p.add_argument("--terminal", type=float, default=None, metavar="ANGLE")
    return parser


_TOLERANCES = [(spectral, "ROOT_RESIDUAL_TOL"), (reduction, "ORTHO_TOL"), (perturbation, "EIGEN_TOL")]


def _apply_tolerance():
    """``CMV_TOL`` overrides the residual tolerances of the root finder, reduction and tracker.

    Returns the previous values for :func:`_restore_tolerance`.
    """
    saved = [(mod, name, getattr(mod, name)) for mod, name in _TOLERANCES]
    value = os.environ.get(TOL_ENV)
    if not value:
        return saved
    try:
        tol = float(value)
    except ValueError:
        raise UsageError(f"{TOL_ENV} must be a number, got {value!r}") from None
    if not tol > 0:
        raise UsageError(f"{TOL_ENV} must be positive")
    for mod, name in _TOLERANCES:
        setattr(mod, name, tol)
    return saved


def _restore_tolerance(saved):
    for mod, name, value in saved:
        setattr(mod, name, value)


def _error(exc):
    body = {"type": type(exc).__name__, "message": str(exc)}
    index = getattr(exc, "index", None)
    if index is not None:
        body["index"] = index
    residual = getattr(exc, "residual", None)
    if residual is not None:
        body["residual"] = residual
    return dump_json({"error": body})


def _exit_code(exc):
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (DomainError, ReducibleError)):
        return EXIT_DOMAIN
    if isinstance(exc, (ConvergenceError, TrackingError)):
        return EXIT_NUMERIC
    return 1


def run(argv=None, stdout=None, stderr=None):
    """Execute one job; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "track" else "json"
    if args.command == "quadrature" and args.terminal is not None:
        args.terminal = complex(np.exp(1j * args.terminal))
    saved = [(mod, name, getattr(mod, name)) for mod, name in _TOLERANCES]
    try:
        saved = _apply_tolerance()
        seq, extras = parse_input(load_document(_read(args.input)))
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            # restored by catch_warnings on exit
            warnings.showwarning = lambda message, *_, **__: stderr.write(f"warning: {message}\n")
            text = COMMANDS[args.command](args, seq, extras)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except (CMVError, OSError) as exc:
        stderr.write(_error(exc))
        return _exit_code(exc)
    finally:
        _restore_tolerance(saved)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
