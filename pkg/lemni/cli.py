#!/usr/bin/env python3
"""
Command-line front end: trace lemniscates, report their lengths, check the
bounds around them, search for long ones, and measure preimages on the
sphere. Options come from dataclass defaults, a lemni.toml file, CLI flags
and `--set key=value` overrides, in increasing precedence.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import field
from pathlib import Path

import numpy as np
from tqdm import tqdm

from . import __version__
from .config_utils import (
    apply_overrides,
    config_dataclass,
    discover_config_path,
    merge_cli_args_with_config_for,
    parse_known_args_for,
    section_dict,
)
from .error_handling import EXIT_OK, LemniError, ValidationError, report_error, require
from .extremal import SearchOptions, critical_value_report, erdos_candidate, exterior_critical_values, search
from .geometry import check_lemma3
from .levelset import TraceOptions, is_connected, permutation_cycles, trace
from .measure import (
    ALPHA0_BOUND,
    LengthOptions,
    Line,
    cartan_cover,
    cluster_split,
    length_integral,
    line_intersection_count,
    projection_corollary_report,
    verify_theorem1,
)
from .poly import MonicPolynomial, PolyOptions, from_coefficients, from_roots
from .spherical import (
    CircleOnSphere,
    SphereOptions,
    check_theorem2,
    poincare_length,
    preimage_trace,
    rational_function,
)
from .svg import level_curve_svg, spherical_curve_svg

logger = logging.getLogger(__name__)

COMMANDS = ("trace", "length", "bounds", "search", "sphere", "report")
FORMATS = {
    "trace": ("json", "svg"),
    "length": ("json",),
    "bounds": ("json",),
    "search": ("json",),
    "sphere": ("json", "svg"),
    "report": ("json", "csv"),
}
REPORT_COLUMNS = ("d", "length", "length_over_d", "bound_alpha0_d", "connected", "max_crit_dist")
SEED_ENV = "LEMNI_SEED"


@config_dataclass("lemni")
class JobSpec:
    trace: TraceOptions = field(default_factory=TraceOptions)
    length: LengthOptions = field(default_factory=LengthOptions)
    search: SearchOptions = field(default_factory=SearchOptions)
    sphere: SphereOptions = field(default_factory=SphereOptions)
    poly: PolyOptions = field(default_factory=PolyOptions)

    command: str = "length"  # one of trace, length, bounds, search, sphere, report
    roots: str | None = None  # comma-separated complex roots, e.g. "i,-i"
    coeffs: str | None = None  # comma-separated coefficients from the constant term up; last must be 1
    numerator: str | None = None  # sphere: numerator coefficients, constant term first
    denominator: str | None = None  # sphere: denominator coefficients (default "1")
    circle: str | None = None  # sphere: "center,radius" (default the unit circle)
    line: str | None = None  # sphere: "theta,x", the line Re(z·e^{-iθ}) = x
    degree: int = 2  # search degree
    family: str = "zd+1"  # report family: zd or zd+1
    dmax: int = 6  # report sweeps d = 1..dmax
    n_lines: int = 1000  # bounds: random lines tried against E(p)
    cartan_level: float = 1.0  # bounds: level M of the Cartan cover
    options: list[str] = field(default_factory=list)  # key=value overrides of the section options
    output: Path | None = None  # output file (stdout when unset)
    format: str = "json"  # json, csv (report) or svg (trace, sphere)
    seed: int | None = None  # default: $LEMNI_SEED, else 0
    config_path: Path | None = None  # path to a lemni.toml config file
    verbose: bool = False  # debug logging on stderr
    quiet: bool = False  # no progress bars


def _normalize_params(params: JobSpec) -> None:
    if isinstance(params.options, str):
        params.options = params.options.replace(",", " ").split()
    elif params.options is None:
        params.options = []
    elif not isinstance(params.options, list):
        params.options = list(params.options)


# -- input grammar -------------------------------------------------------------


def parse_complex(token: str) -> complex:
    """`a+bi` literal, whitespace allowed: "2", "-i", "1.5-0.25i", "3i"."""
    text = "".join(token.split())
    if not text:
        raise ValidationError("empty complex literal")
    try:
        value = complex(text.replace("i", "j"))
    except ValueError:
        raise ValidationError(f"bad complex literal: {token!r}") from None
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValidationError(f"complex literal must be finite: {token!r}")
    return value


def parse_complex_list(text: str) -> list[complex]:
    return [parse_complex(tok) for tok in text.split(",")]


def _polynomial(spec: JobSpec, seed: int) -> MonicPolynomial:
    if spec.roots is not None:
        return from_roots(parse_complex_list(spec.roots), spec.poly)
    return from_coefficients(parse_complex_list(spec.coeffs), spec.poly, seed=seed)


def _circle(spec: JobSpec) -> CircleOnSphere:
    if spec.line is not None:
        parts = spec.line.split(",")
        require(len(parts) == 2, f"line must look like theta,x: {spec.line!r}")
        try:
            theta, x = (float(p) for p in parts)
        except ValueError:
            raise ValidationError(f"bad line: {spec.line!r}") from None
        return CircleOnSphere.line(theta, x)
    if spec.circle is not None:
        parts = spec.circle.split(",")
        require(len(parts) == 2, f"circle must look like center,radius: {spec.circle!r}")
        center = parse_complex(parts[0])
        radius = parse_complex(parts[1])
        require(radius.imag == 0, "circle radius must be real")
        return CircleOnSphere.circle(center, radius.real)
    return CircleOnSphere.circle(0j, 1.0)


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _check_job(spec: JobSpec) -> None:
    require(spec.command in COMMANDS, f"unknown command {spec.command!r}; expected one of {', '.join(COMMANDS)}")
    require(
        spec.format in FORMATS[spec.command],
        f"format {spec.format!r} not available for {spec.command} (use {', '.join(FORMATS[spec.command])})",
    )
    if spec.command in ("trace", "length", "bounds"):
        require((spec.roots is None) != (spec.coeffs is None), "give exactly one of --roots and --coeffs")
    if spec.command == "sphere":
        require(spec.roots is None and spec.coeffs is None, "sphere takes --numerator/--denominator, not a polynomial")
        require(spec.numerator is not None, "sphere needs --numerator")
        require(spec.circle is None or spec.line is None, "give at most one of --circle and --line")
    if spec.command == "report":
        require(spec.family in ("zd", "zd+1"), f"unknown family {spec.family!r}; expected zd or zd+1")
        require(spec.dmax >= 1, "dmax must be at least 1")
    if spec.command == "bounds":
        require(spec.n_lines >= 1, "n_lines must be at least 1")


# -- output ----------------------------------------------------------------------


def _plain(obj):
    """JSON-ready copy with floats cut to 12 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else str(obj)
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return str(obj)


def dumps_report(payload: dict) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"


def _envelope(spec: JobSpec, seed: int, applied: dict, result: dict) -> dict:
    return {
        "tool": "lemni",
        "version": __version__,
        "command": spec.command,
        "seed": seed,
        "options": section_dict(spec),
        "overrides": applied,
        "result": result,
    }


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({
            k: (f"{v:.12g}" if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v)
            for k, v in row.items()
        })
    return buf.getvalue()


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    print(f"Report written to {output}", file=sys.stderr)


# -- commands --------------------------------------------------------------------


def _cmd_trace(spec: JobSpec, seed: int, applied: dict) -> str:
    p = _polynomial(spec, seed)
    curve = trace(p, spec.trace, poly_options=spec.poly)
    if spec.format == "svg":
        return level_curve_svg(curve)
    result = curve.to_dict()
    result["polynomial"] = p.to_dict()
    result["monodromy_cycles"] = [list(c) for c in permutation_cycles(curve.monodromy)]
    return dumps_report(_envelope(spec, seed, applied, result))


def _cmd_length(spec: JobSpec, seed: int, applied: dict) -> str:
    p = _polynomial(spec, seed)
    report = verify_theorem1(p, spec.length.tol, spec.length, spec.trace)
    result = report.to_dict()
    result["polynomial"] = p.to_dict()
    return dumps_report(_envelope(spec, seed, applied, result))


def _cmd_bounds(spec: JobSpec, seed: int, applied: dict) -> str:
    p = _polynomial(spec, seed)
    d = p.degree
    curve = trace(p, spec.trace, poly_options=spec.poly)
    rng = np.random.default_rng(seed)
    reach = float(np.max(np.abs(curve.vertices()))) + 1.0
    thetas = rng.uniform(0.0, math.pi, spec.n_lines)
    offsets = rng.uniform(-reach, reach, spec.n_lines)
    counts = [
        line_intersection_count(p, Line(float(t), float(x)), curve)
        for t, x in tqdm(zip(thetas, offsets), total=spec.n_lines, desc="Cutting lines",
                         unit="line", disable=spec.quiet)
    ]
    projections = projection_corollary_report(curve, d)
    lemma3 = check_lemma3(curve)
    cover = cartan_cover(p, spec.cartan_level)
    split = cluster_split(p.roots, spec.cartan_level)
    result = {
        "polynomial": p.to_dict(),
        "component_count": curve.component_count,
        "line_intersections": {
            "lines": spec.n_lines,
            "max": max(counts),
            "bound": 2 * d,
            "holds": max(counts) <= 2 * d,
        },
        "projection_corollary": {
            "holds": all(row["holds"] for row in projections),
            "components": projections,
        },
        "hull": {
            "perimeter": lemma3.hull_perimeter,
            "bound": lemma3.bound,
            "applicable": lemma3.applicable,
            "holds": lemma3.holds,
        },
        "cartan": {**cover.to_dict(), "projection_bound": cover.projection_bound()},
        "cluster_split": None if split is None else [len(split[0]), len(split[1])],
    }
    if d >= 2:
        result["critical_value_distances"] = critical_value_report(p)
        result["exterior_critical_values"] = exterior_critical_values(p)
    return dumps_report(_envelope(spec, seed, applied, result))


def _cmd_search(spec: JobSpec, seed: int, applied: dict) -> str:
    found = search(spec.degree, spec.search.budget, seed, spec.search, progress=not spec.quiet)
    candidate = length_integral(erdos_candidate(spec.degree), spec.length.tol, spec.length)
    result = found.to_dict()
    result["candidate_length"] = candidate
    result["margin"] = found.best_length - candidate
    return dumps_report(_envelope(spec, seed, applied, result))


def _cmd_sphere(spec: JobSpec, seed: int, applied: dict) -> str:
    numerator = parse_complex_list(spec.numerator)
    denominator = parse_complex_list(spec.denominator) if spec.denominator else [1.0]
    f = rational_function(numerator, denominator, spec.sphere)
    C = _circle(spec)
    curve = preimage_trace(f, C, spec.sphere)
    if spec.format == "svg":
        return spherical_curve_svg(curve)
    estimate, stderr = poincare_length(curve, spec.sphere.n_samples, seed)
    check = check_theorem2(f, C, spec.sphere, curve=curve)
    result = {
        "function": f.to_dict(),
        "circle": C.to_dict(),
        "curve": curve.to_dict(),
        "poincare_length": estimate,
        "poincare_stderr": stderr,
        "bound": check.bound,
        "holds": check.holds,
    }
    return dumps_report(_envelope(spec, seed, applied, result))


def family_polynomial(family: str, d: int) -> MonicPolynomial:
    """z^d or z^d + 1."""
    return erdos_candidate(d) if family == "zd+1" else from_roots(np.zeros(d))


def sweep_rows(spec: JobSpec) -> list[dict]:
    rows = []
    for d in tqdm(range(1, spec.dmax + 1), desc=f"Sweeping {spec.family}", unit="degree", disable=spec.quiet):
        p = family_polynomial(spec.family, d)
        length = length_integral(p, spec.length.tol, spec.length)
        rows.append({
            "d": d,
            "length": length,
            "length_over_d": length / d,
            "bound_alpha0_d": ALPHA0_BOUND * d,
            "connected": is_connected(p, spec.trace),
            "max_crit_dist": max(critical_value_report(p)) if d >= 2 else 0.0,
        })
    return rows


def _cmd_report(spec: JobSpec, seed: int, applied: dict) -> str:
    rows = sweep_rows(spec)
    if spec.format == "csv":
        return _csv_text(rows)
    result = {"family": spec.family, "dmax": spec.dmax, "rows": rows}
    return dumps_report(_envelope(spec, seed, applied, result))


HANDLERS = {
    "trace": _cmd_trace,
    "length": _cmd_length,
    "bounds": _cmd_bounds,
    "search": _cmd_search,
    "sphere": _cmd_sphere,
    "report": _cmd_report,
}


# -- entry points -------------------------------------------------------------------


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(params_: JobSpec, overrides: list[str] | None = None, command: str | None = None) -> int:
    """Resolve options, run one command, write its artifact; returns the exit code."""
    _configure_logging(bool(params_.verbose))
    try:
        spec: JobSpec = merge_cli_args_with_config_for(
            params_, params_.config_path, root_cls=JobSpec, normalize=_normalize_params
        )
        if command is not None:
            spec.command = command
        applied = apply_overrides(spec, [*spec.options, *(overrides or [])])
        _check_job(spec)
        seed = resolve_seed(spec.seed)
        logger.debug("running %s with seed %d", spec.command, seed)
        _emit(HANDLERS[spec.command](spec, seed, applied), spec.output)
    except (LemniError, ValueError) as exc:
        return report_error(exc)
    return EXIT_OK


def _split_overrides(argv: list[str]) -> tuple[list[str], list[str]]:
    """Pull every `--set key=value` (or `--set=key=value`) out of argv."""
    overrides, rest = [], []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg == "--set" and i + 1 < len(argv):
            overrides.append(argv[i + 1])
            i += 2
            continue
        if arg.startswith("--set="):
            overrides.append(arg.split("=", 1)[1])
        else:
            rest.append(arg)
        i += 1
    return overrides, rest


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    command = args.pop(0) if args and not args[0].startswith("-") else None
    overrides, args = _split_overrides(args)
    cfg_path = discover_config_path(args)

    params, extra = parse_known_args_for(
        JobSpec,
        description=(
            "Trace polynomial lemniscates |p(z)| = 1, measure their length, "
            "check the bounds around them, and search for long ones."
        ),
        argv=args,
    )
    params.config_path = cfg_path
    if extra:
        return report_error(ValidationError("unrecognized arguments: " + " ".join(extra)))
    if command is not None and command not in COMMANDS:
        return report_error(ValidationError(
            f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}"
        ))
    return run(params, overrides, command)


if __name__ == "__main__":
    sys.exit(main())
