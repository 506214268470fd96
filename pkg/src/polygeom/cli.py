"""Command-line interface: ``polygeom <command> [options]``.

Exit codes: 0 success, 1 a verdict failed, 2 invalid input, 3 numerical
failure, 4 padding did not settle.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import load_document, spec_from_dict
from .geometry import GeometrySpec, gram_matrix
from .numerics import NumericalError, SpecError, override_tolerances
from .ortho import fmt, jacobi_coefficients, multiplication_matrix, orthonormalize

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERICAL, EXIT_UNCONVERGED = 0, 1, 2, 3, 4


class UsageError(SpecError):
    pass


# ---------------------------------------------------------------------------
# output


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": _jsonable(float(v.real)), "im": _jsonable(float(v.imag))}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _Float(float(v))
    return v


class _Float(float):
    pass


def dumps_report(doc: Any) -> str:
    """JSON with sorted keys, two-space indent and floats at 17 significant digits."""

    def enc(v: Any, indent: str) -> str:
        inner = indent + "  "
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{inner}{json.dumps(k)}: {enc(v[k], inner)}" for k in sorted(v)]
            return "{\n" + ",\n".join(items) + "\n" + indent + "}"
        if isinstance(v, list):
            if not v:
                return "[]"
            return "[\n" + ",\n".join(inner + enc(x, inner) for x in v) + "\n" + indent + "]"
        if isinstance(v, _Float):
            return fmt(v) if math.isfinite(v) else json.dumps(str(v))
        return json.dumps(v)

    return enc(_jsonable(doc), "") + "\n"


def write_output(text: str, out: str | None) -> None:
    """Write ``text`` atomically (temp file + rename), or to stdout."""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(out)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# configuration


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None


def _fourier_flag(text: str) -> dict:
    out: dict = {}
    for item in text.split(","):
        if not item.strip():
            continue
        k, sep, v = item.partition(":")
        if not sep:
            raise UsageError("--fourier entries look like k:value or k:re:im")
        parts = v.split(":")
        try:
            out[k.strip()] = [float(parts[0]), float(parts[1])] if len(parts) == 2 else float(parts[0])
        except (ValueError, IndexError):
            raise UsageError(f"bad --fourier entry {item!r}") from None
    return out


def _geometry_doc(args, path: str | None) -> dict:
    doc = load_document(path) if path else {}
    if args.kind:
        doc["kind"] = args.kind
    if args.interval:
        doc["interval"] = _floats(args.interval, "--interval")
    if args.weight_poly:
        doc["weight"] = {"type": "polynomial", "coefficients": _floats(args.weight_poly, "--weight-poly")}
    if args.weight_exp_poly:
        doc["weight"] = {
            "type": "exp_polynomial",
            "coefficients": _floats(args.weight_exp_poly, "--weight-exp-poly"),
        }
    if args.fourier:
        doc["fourier"] = _fourier_flag(args.fourier)
    if args.lam is not None:
        doc["lambda"] = args.lam
    if args.sobolev_coefficients:
        doc["coefficients"] = _floats(args.sobolev_coefficients, "--sobolev-coefficients")
    if args.epsilon is not None:
        doc["epsilon"] = args.epsilon
    if args.mode is not None:
        doc["mode"] = args.mode
    if args.order is not None:
        doc["order"] = args.order
    return doc


def _spec(args, path: str | None) -> tuple[GeometrySpec, dict]:
    doc = _geometry_doc(args, path)
    if "kind" not in doc:
        raise UsageError("no geometry given (use --spec or --kind)")
    return spec_from_dict(doc), doc


def _degree(args, doc: dict) -> int:
    N = args.degree if args.degree is not None else doc.get("degree")
    if N is None:
        raise UsageError("--degree is required")
    if isinstance(N, bool) or int(N) != N or N < 0:
        raise UsageError(f"degree must be a nonnegative integer, got {N!r}")
    return int(N)


def _padding(args, doc: dict) -> int | None:
    M = args.padding if args.padding is not None else doc.get("padding")
    if M is None:
        return None
    if isinstance(M, bool) or int(M) != M or M < 0:
        raise UsageError(f"padding must be a nonnegative integer, got {M!r}")
    return int(M)


def _grid(args, doc: dict) -> list[float]:
    if args.grid is not None:
        grid = _floats(args.grid, "--grid")
    else:
        grid = doc.get("grid") or []
    if not grid:
        raise UsageError("empty grid")
    return [float(g) for g in grid]


def _tolerances(path: str | None) -> dict:
    if not path:
        return {}
    doc = load_document(path)
    for k, v in doc.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise UsageError(f"tolerance {k!r} must be a number")
    return doc


# ---------------------------------------------------------------------------
# commands


def cmd_orthogonalize(args) -> tuple[int, str]:
    spec, doc = _spec(args, args.spec)
    N = _degree(args, doc)
    basis = orthonormalize(gram_matrix(spec, N))
    if args.format == "csv":
        return EXIT_OK, basis.to_csv()
    cols = [str(lab) for lab in basis.labels]
    rows = [{"n": k, "coefficients": dict(zip(cols, basis.C[:, k]))} for k in range(basis.dim)]
    return EXIT_OK, dumps_report({"geometry": spec.describe(), "N": N, "family": basis.basis.family, "basis": rows})


def cmd_laplacian(args) -> tuple[int, str]:
    from .laplacian import band_profile, laplacian

    spec, doc = _spec(args, args.spec)
    N = _degree(args, doc)
    lap = laplacian(spec, N)
    if args.format == "csv":
        return EXIT_OK, lap.to_csv()
    prof = band_profile(lap.entries)
    return EXIT_OK, dumps_report(
        {
            "geometry": spec.describe(),
            "N": N,
            "labels": list(lap.labels),
            "family": lap.basis.basis.family,
            "entries": lap.entries,
            "bandwidth": prof.bandwidth,
            "decay": prof.decay,
        }
    )


def cmd_compare(args) -> tuple[int, str]:
    from .resolvent import stability_certificate

    if not args.spec2:
        raise UsageError("compare needs --spec2")
    g1, doc = _spec(args, args.spec)
    g2 = spec_from_dict(load_document(args.spec2))
    N = _degree(args, doc)
    M = _padding(args, doc)
    cert = stability_certificate(g1, g2, N, M)
    if not cert.padding_converged:
        code = EXIT_UNCONVERGED
    else:
        code = EXIT_OK if cert.passed else EXIT_FAIL
    if args.format == "csv":
        lines = ["name,lhs,rhs,verdict,tolerance"]
        for r in cert.records():
            lines.append(f"{r['name']},{fmt(r['lhs'])},{fmt(r['rhs'])},{r['verdict']},{fmt(r['tolerance'])}")
        return code, "\n".join(lines) + "\n"
    report = {
        "geometry_1": g1.describe(),
        "geometry_2": g2.describe(),
        "quantities": cert.summary(),
        "gauge_unitary": cert.gauge_unitary,
        "inequalities": cert.records(),
    }
    return code, dumps_report(report)


def cmd_scan_lambda(args) -> tuple[int, str]:
    from .circle import lambda_scan

    spec, doc = _spec(args, args.spec)
    if not spec.is_circle:
        raise UsageError("scan-lambda needs a circle geometry")
    N = _degree(args, doc)
    grid = _grid(args, doc)
    scan = lambda_scan(spec.weight, N, grid, _padding(args, doc))
    if any(not r.padding_converged for r in scan.rows):
        code = EXIT_UNCONVERGED
    else:
        code = EXIT_OK if scan.passed else EXIT_FAIL
    if args.format == "csv":
        return code, scan.to_csv()
    rows = [
        {
            "lambda": r.lam,
            "d_res_compressed": r.d_res_compressed,
            "d_res_truncop": r.d_res_truncop,
            "cn_bound": r.bound,
            "projector_diff": r.projector_diff,
            "basis_residual_g1": r.basis_residual_g1,
            "basis_residual_g2": r.basis_residual_g2,
            "kernel_sup_diff": r.kernel_sup_diff,
            "verdict": r.verdict,
        }
        for r in scan.rows
    ]
    return code, dumps_report({"N": N, "rows": rows, "slope": scan.slope, "slope_truncop": scan.slope_truncop})


def cmd_scan_epsilon(args) -> tuple[int, str]:
    from .annulus import epsilon_scan, nonincreasing, scan_csv

    doc = _geometry_doc(args, args.spec)
    doc.setdefault("kind", "annulus_radial_mode")
    if doc["kind"] != "annulus_radial_mode":
        raise UsageError("scan-epsilon needs an annulus_radial_mode geometry")
    doc.setdefault("epsilon", 0.5)
    spec = spec_from_dict(doc)
    N = _degree(args, doc)
    grid = _grid(args, doc)
    for e in grid:
        if not 0 < e < 1:
            raise UsageError("epsilon values must lie in (0, 1)")
    rows = epsilon_scan(spec.mode, spec.order, N, grid, _padding(args, doc))
    trend = nonincreasing([r.d_res for r in rows])
    if any(not r.padding_converged for r in rows):
        code = EXIT_UNCONVERGED
    else:
        code = EXIT_OK if trend else EXIT_FAIL
    if args.format == "csv":
        return code, scan_csv(rows)
    return code, dumps_report(
        {
            "mode": spec.mode,
            "order": spec.order,
            "N": N,
            "nonincreasing": trend,
            "rows": [
                {
                    "epsilon": r.epsilon,
                    "d_res": r.d_res,
                    "projector_diff": r.projector_diff,
                    "basis_residual": r.basis_residual,
                }
                for r in rows
            ],
        }
    )


def cmd_jacobi(args) -> tuple[int, str]:
    spec, doc = _spec(args, args.spec)
    N = _degree(args, doc)
    basis = orthonormalize(gram_matrix(spec, N, spec.working_family))
    jac = jacobi_coefficients(multiplication_matrix(spec, basis))
    if args.format == "csv":
        lines = ["n,a_n,b_n"]
        for n in range(len(jac.b)):
            lines.append(f"{n},{fmt(jac.a[n - 1]) if n else ''},{fmt(jac.b[n])}")
        return EXIT_OK, "\n".join(lines) + "\n"
    return EXIT_OK, dumps_report({"N": N, "a": jac.a, "b": jac.b})


COMMANDS = {
    "orthogonalize": cmd_orthogonalize,
    "laplacian": cmd_laplacian,
    "compare": cmd_compare,
    "scan-lambda": cmd_scan_lambda,
    "scan-epsilon": cmd_scan_epsilon,
    "jacobi": cmd_jacobi,
}

_DEFAULT_FORMAT = {"compare": "report"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polygeom", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="geometry configuration (JSON)")
    common.add_argument("--spec2", help="second geometry (compare)")
    common.add_argument("--degree", type=int, help="degree / mode cutoff N")
    common.add_argument("--padding", type=int, help="padding cutoff M (disables adaptive padding)")
    common.add_argument("--grid", help="comma-separated lambda or epsilon values")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "report"))
    common.add_argument("--tol-overrides", help="JSON object of tolerance overrides")
    geo = common.add_argument_group("geometry fields (override --spec)")
    geo.add_argument("--kind")
    geo.add_argument("--interval", help="a,b")
    geo.add_argument("--weight-poly", help="ascending polynomial weight coefficients")
    geo.add_argument("--weight-exp-poly", help="weight exp(p(x)), ascending coefficients of p")
    geo.add_argument("--fourier", help="k:value or k:re:im entries for k >= 0, comma separated")
    geo.add_argument("--lam", type=float, help="circle Sobolev lambda")
    geo.add_argument("--sobolev-coefficients", help="lambda_0,...,lambda_s")
    geo.add_argument("--epsilon", type=float)
    geo.add_argument("--mode", type=int)
    geo.add_argument("--order", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INVALID
    if args.format is None:
        args.format = _DEFAULT_FORMAT.get(args.command, "csv")
    try:
        with override_tolerances(**_tolerances(args.tol_overrides)):
            code, text = COMMANDS[args.command](args)
        write_output(text, args.out)
        return code
    except SpecError as exc:
        _report(exc)
        return EXIT_INVALID
    except NumericalError as exc:
        _report(exc)
        return EXIT_NUMERICAL


def _report(exc: Exception) -> None:
    name = type(exc).__name__
    msg = str(exc)
    if not msg.startswith(name):
        msg = f"{name}: {msg}"
    print(f"polygeom: error: {msg}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
