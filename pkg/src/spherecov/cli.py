"""Command-line surface: eval, validate, fit, krige, simulate, assimilate.

All commands are deterministic given their full flag set (seeds included)
and emit plot-ready CSV or JSON.  Exit codes are a stable contract:
0 success, 1 I/O or malformed data, 2 invalid model or numerical failure,
3 not positive definite, 4 insufficient data.

The data-facing commands (fit, krige, simulate) work on the geostatistical
case: models with one 2-sphere factor and at most one line factor, and
lat/lon/time CSV files.  The library itself is not restricted.
"""

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from .assimilation import VarProblem, enkf_update, solve_3dvar
from .covariance import (
    load_model,
    model_to_dict,
    sequence_model,
)
from .errors import (
    DimensionMismatchError,
    DomainError,
    IngestError,
    InsufficientDataError,
    ModelValidationError,
    NotPositiveDefiniteError,
    NumericalError,
)
from .fitting import empirical_isotropic_correlation, fit_nonnegative, monotone_shape
from .geometry import SpaceTimePoint, from_lat_lon, ingest_csv
from .harmonics import GegenbauerBasis
from .kriging import KrigingSystem, krige, krige_neighborhood
from .covariance import SchoenbergSequence
from .simulation import psd_square_root, random_points, sample_field
from .validation import build_gram, condition_number, psd_check

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID_MODEL = 2
EXIT_NOT_PSD = 3
EXIT_INSUFFICIENT_DATA = 4


# --------------------------------------------------------------------------
# shared I/O helpers
# --------------------------------------------------------------------------

def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _read_points_csv(path):
    """Rows of a lat,lon,t[,value] file as (lat, lon, t, value-or-None)."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError("%s: empty file" % path) from None
        if header not in (["lat", "lon", "t"], ["lat", "lon", "t", "value"]):
            raise IngestError(
                "%s: expected header 'lat,lon,t' or 'lat,lon,t,value'" % path
            )
        has_value = len(header) == 4
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise IngestError(
                    "%s: line %d: expected %d fields, got %d"
                    % (path, lineno, len(header), len(row))
                )
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise IngestError("%s: line %d: %s" % (path, lineno, exc)) from None
            rows.append((vals[0], vals[1], vals[2], vals[3] if has_value else None))
    return rows


def _require_geo_model(model):
    if (
        model.sphere_count != 1
        or model.line_count > 1
        or next(
            f.basis.sphere_dim for f in model.factors if hasattr(f, "basis")
        )
        != 2
    ):
        raise ModelValidationError(
            "this command expects a model with one 2-sphere factor and at most "
            "one line factor"
        )


def _geo_point(model, lat, lon, t):
    times = (t,) if model.line_count == 1 else ()
    return SpaceTimePoint(spheres=(from_lat_lon(lat, lon),), times=times)


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------

def _parse_grid(spec, model):
    axes = {}
    for part in spec.split(","):
        name, sep, rng = part.partition("=")
        pieces = rng.split(":")
        if not sep or len(pieces) != 3:
            raise DomainError(
                "grid axis %r must look like name=start:stop:count" % part
            )
        try:
            lo, hi, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
        except ValueError as exc:
            raise DomainError("grid axis %r: %s" % (part, exc)) from None
        if count < 1:
            raise DomainError("grid axis %r needs count >= 1" % part)
        axes[name.strip()] = np.linspace(lo, hi, count)
    sphere_names = ["x%d" % (i + 1) for i in range(model.sphere_count)]
    line_names = ["t%d" % (j + 1) for j in range(model.line_count)]
    if model.sphere_count == 1 and "x" in axes:
        axes["x1"] = axes.pop("x")
    if model.line_count == 1 and "t" in axes:
        axes["t1"] = axes.pop("t")
    wanted = sphere_names + line_names
    missing = [n for n in wanted if n not in axes]
    extra = [n for n in axes if n not in wanted]
    if missing or extra:
        raise DomainError(
            "grid must define exactly %s (missing %s, unknown %s)"
            % (wanted, missing, extra)
        )
    mesh = np.meshgrid(*[axes[n] for n in wanted], indexing="ij")
    cols = [m.ravel() for m in mesh]
    display = []
    for n in wanted:
        if n == "x1" and model.sphere_count == 1:
            display.append("x")
        elif n == "t1" and model.line_count == 1:
            display.append("t")
        else:
            display.append(n)
    return display, cols[: model.sphere_count], cols[model.sphere_count :]


def cmd_eval(args):
    model = load_model(args.model)
    if args.grid:
        names, cosines, lags = _parse_grid(args.grid, model)
        values = model.separation_values(cosines, lags)
        header = names + ["value"]
        rows = [
            tuple(float(c[i]) for c in cosines)
            + tuple(float(t[i]) for t in lags)
            + (float(values[i]),)
            for i in range(values.shape[0])
        ]
    else:
        _require_geo_model(model)
        with open(args.pairs, "r", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header_in = [h.strip() for h in next(reader)]
            if header_in != ["lat1", "lon1", "t1", "lat2", "lon2", "t2"]:
                raise IngestError(
                    "%s: expected header 'lat1,lon1,t1,lat2,lon2,t2'" % args.pairs
                )
            raw = []
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                try:
                    raw.append([float(v) for v in row])
                except ValueError as exc:
                    raise IngestError(
                        "%s: line %d: %s" % (args.pairs, lineno, exc)
                    ) from None
        ps = [_geo_point(model, r[0], r[1], r[2]) for r in raw]
        qs = [_geo_point(model, r[3], r[4], r[5]) for r in raw]
        values = model.covariance_pairs(ps, qs)
        header = ["lat1", "lon1", "t1", "lat2", "lon2", "t2", "x", "dt", "value"]
        rows = []
        for r, p, q, v in zip(raw, ps, qs, values):
            x = float(np.clip(np.dot(p.spheres[0].coords, q.spheres[0].coords), -1, 1))
            dt = (p.times[0] - q.times[0]) if model.line_count == 1 else 0.0
            rows.append(tuple(r) + (x, float(dt), float(v)))
    _write_text(args.output, _csv_text(header, rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------

def cmd_validate(args):
    # indefinite (hand-edited) coefficient maps are admitted here on purpose:
    # this command's whole job is to convict them spectrally (exit 3)
    model = load_model(args.model, allow_indefinite=True)
    rng = np.random.default_rng(args.seed)
    points = random_points(model, args.points, rng)
    gram = build_gram(model, points)
    verdict = psd_check(gram, args.tol)
    doc = {
        "verdict": "PSD" if verdict.is_psd else "NOT_PSD",
        "min_eigenvalue": verdict.min_eigenvalue,
        "condition_number": condition_number(gram),
        "tol": verdict.tol,
        "seed": args.seed,
    }
    if verdict.witness is not None:
        doc["witness"] = [float(v) for v in verdict.witness]
    _write_text(args.output, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if verdict.is_psd else EXIT_NOT_PSD


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------

def cmd_fit(args):
    with open(args.data, "rb") as fh:
        payload = fh.read()
    records = ingest_csv(payload)
    bins = empirical_isotropic_correlation(records, args.bins, args.time_window)
    basis = GegenbauerBasis(sphere_dim=args.dim, max_degree=args.degree)
    curve = [(b.x, b.correlation, float(b.count)) for b in bins]
    result = fit_nonnegative(curve, basis, args.degree)
    seq = result.sequence
    if args.monotone:
        shaped = monotone_shape(seq.coefficients)
        seq = SchoenbergSequence(scale=seq.scale, coefficients=shaped)
    model = sequence_model(seq, basis)
    provenance = {
        "source_sha256": hashlib.sha256(payload).hexdigest(),
        "bins": args.bins,
        "time_window": args.time_window,
        "degree": args.degree,
        "dim": args.dim,
        "monotone": bool(args.monotone),
        "residual": result.residual,
    }
    doc = model_to_dict(model)
    doc["provenance"] = provenance
    _write_text(args.output, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# krige
# --------------------------------------------------------------------------

def cmd_krige(args):
    model = load_model(args.model)
    _require_geo_model(model)
    with open(args.data, "rb") as fh:
        records = ingest_csv(fh.read())
    if not records:
        raise InsufficientDataError("no observations in %s" % args.data)
    points = [_geo_point(model, r.lat, r.lon, r.t) for r in records]
    values = np.array([r.value for r in records])
    system = KrigingSystem(gram=build_gram(model, points), values=values, mean=args.mean)
    neighborhood = None
    if args.neighborhood:
        try:
            x_min, t_max = (float(v) for v in args.neighborhood.split(","))
        except ValueError:
            raise DomainError("--neighborhood must look like x_min,t_max") from None
        neighborhood = (x_min, t_max)
    rows = []
    for lat, lon, t, _ in _read_points_csv(args.targets):
        target = _geo_point(model, lat, lon, t)
        if neighborhood is None:
            res = krige(system, model, target)
        else:
            res = krige_neighborhood(system, model, target, *neighborhood)
        rows.append((lat, lon, t, res.prediction, res.variance))
    header = ["target_lat", "target_lon", "target_t", "prediction", "variance"]
    _write_text(args.output, _csv_text(header, rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def cmd_simulate(args):
    model = load_model(args.model)
    _require_geo_model(model)
    locs = _read_points_csv(args.points)
    if not locs:
        raise InsufficientDataError("no points in %s" % args.points)
    points = [_geo_point(model, lat, lon, t) for lat, lon, t, _ in locs]
    draws = sample_field(model, points, args.draws, args.seed)
    if args.draws == 1:
        header = ["lat", "lon", "t", "value"]
        rows = [
            (lat, lon, t, float(draws[0, i]))
            for i, (lat, lon, t, _) in enumerate(locs)
        ]
    else:
        header = ["lat", "lon", "t"] + ["draw_%03d" % d for d in range(args.draws)]
        rows = [
            (lat, lon, t) + tuple(float(v) for v in draws[:, i])
            for i, (lat, lon, t, _) in enumerate(locs)
        ]
    _write_text(args.output, _csv_text(header, rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# assimilate
# --------------------------------------------------------------------------

def cmd_assimilate(args):
    with open(args.problem, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelValidationError("invalid problem file: %s" % exc) from None
    try:
        problem = VarProblem(
            background=doc["background"],
            observations=doc["observations"],
            observation_operator=doc["observation_operator"],
            background_covariance=doc["background_covariance"],
            observation_covariance=doc["observation_covariance"],
            observation_floor=float(doc.get("observation_floor", 0.0)),
        )
    except KeyError as exc:
        raise ModelValidationError("problem file missing key %s" % exc) from None
    if args.ensemble:
        init_seed, update_seed = np.random.SeedSequence(args.seed).spawn(2)
        rng = np.random.default_rng(init_seed)
        noise = rng.standard_normal((args.ensemble, problem.state_dim))
        ensemble = problem.background + noise @ psd_square_root(
            problem.background_covariance
        ).T
        updated = enkf_update(
            ensemble,
            problem.observations,
            problem.observation_operator,
            problem.observation_covariance,
            update_seed,
        )
        analysis = updated.mean(axis=0)
    else:
        analysis = solve_3dvar(problem, tol=args.tol).state
    _write_text(
        args.output, _csv_text(["analysis"], [(float(v),) for v in analysis])
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# parser and entry point
# --------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spherecov",
        description="Space-time covariance models on spheres: evaluate, "
        "validate, fit, krige, simulate, assimilate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a model over pairs or a separation grid")
    p.add_argument("--model", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pairs", help="CSV with header lat1,lon1,t1,lat2,lon2,t2")
    group.add_argument(
        "--grid",
        help="separation grid, e.g. 'x=-1:1:41,t=0:5:11' (name=start:stop:count)",
    )
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", help="spectral positive-definiteness verdict")
    p.add_argument("--model", required=True)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit", help="fit a spherical model to lat,lon,t,value data")
    p.add_argument("--data", required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--time-window", type=float, default=float("inf"))
    p.add_argument("--monotone", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("krige", help="simple kriging at target points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--neighborhood", default=None, help="x_min,t_max")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_krige)

    p = sub.add_parser("simulate", help="draw Gaussian field samples at points")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("assimilate", help="3D-Var (or ensemble) analysis")
    p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--ensemble", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_assimilate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotPositiveDefiniteError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NOT_PSD
    except InsufficientDataError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except IngestError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (
        ModelValidationError,
        DimensionMismatchError,
        DomainError,
        NumericalError,
        ValueError,
    ) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID_MODEL
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
