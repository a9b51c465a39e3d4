"""Command-line front end.

Every run echoes its fully resolved configuration (defaults and seed
included) into the output: as a ``config`` object in JSON, as a leading
``# config: {...}`` comment line in CSV.  Exit status: 0 success, 2 a
Mismatch verdict, 3 any input or domain error (reported on stderr as one
line ``ERROR <Code>: <text>``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from pathlib import Path

from . import clipstudy
from .covparam import CovMultiindex, SymMatrix, omega_unpack, validate_pd
from .errors import DimensionMismatch, GausspriceError, InvalidParameter, ParseError
from .expectation import SCHEMES, QuadratureSpec, default_quadrature, pair, pair_mc
from .gaussian import GaussianModel, sample
from .nonlinearity import parse
from .price import (
    DEFAULT_FD_STEP,
    MISMATCH,
    default_tol,
    fd_derivative,
    mcmahon_derivative,
    price_derivative,
    verify,
)

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_INPUT = 3
DEFAULT_SEED = 0
DEFAULT_SAMPLES = 100_000
INLINE = "inline:"


class UsageError(GausspriceError):
    pass


class IoError(GausspriceError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# input parsing

def parse_cov(source: str) -> SymMatrix:
    """``inline:[[...],...]`` or a path to a JSON file with rows or {"rows": ...}."""
    if source.startswith(INLINE):
        text = source[len(INLINE):]
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise IoError(f"cannot read covariance file {source!r}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid covariance JSON: {exc.msg}", text, exc.pos) from None
    if isinstance(obj, dict):
        return SymMatrix.from_json(obj)
    if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
        raise ParseError("covariance must be a list of rows", text, 0)
    n = len(obj)
    if any(len(r) != n for r in obj):
        raise DimensionMismatch(f"covariance rows do not form an {n}x{n} matrix")
    return SymMatrix.from_rows(obj)


_BETA_ITEM = re.compile(r"\s*(\d+)\s*,\s*(\d+)\s*(?::\s*(\d+)\s*)?$")


def parse_beta(text: str, n: int) -> CovMultiindex:
    """``"i,j:k;..."`` with 1-based pairs, i <= j; ``:k`` defaults to 1."""
    entries: dict[tuple[int, int], int] = {}
    pos = 0
    if text.strip():
        for item in text.split(";"):
            m = _BETA_ITEM.match(item)
            if not m:
                raise ParseError("expected 'i,j' or 'i,j:k'", text, pos)
            i, j = int(m.group(1)), int(m.group(2))
            k = int(m.group(3)) if m.group(3) is not None else 1
            if not 1 <= i <= j <= n:
                raise ParseError(f"pair ({i},{j}) needs 1 <= i <= j <= {n}", text, pos)
            entries[(i - 1, j - 1)] = entries.get((i - 1, j - 1), 0) + k
            pos += len(item) + 1
    return CovMultiindex.from_mapping(n, entries)


def _quadrature(args, n: int) -> QuadratureSpec:
    order = args.order if args.order is not None else default_quadrature(n).order_per_axis
    return QuadratureSpec(order, args.scheme)


# output

def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def _flatten(obj: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in obj.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        elif isinstance(v, list):
            out[f"{prefix}{k}"] = json.dumps(v, separators=(",", ":"))
        else:
            out[f"{prefix}{k}"] = v
    return out


def _clean(obj):
    # JSON has no NaN: emit null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def render(config: dict, result: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_clean({"config": config, "result": result}), indent=2) + "\n"
    flat = _flatten(result)
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(flat))
    w.writerow([_fmt(v) for v in flat.values()])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {out!r}: {exc.strerror}") from None


# commands

def _base_config(args) -> dict:
    return {"command": args.command, "format": args.format, "out": args.out}


def _load_problem(args):
    g = parse(args.g)
    sym = parse_cov(args.cov)
    if sym.n != g.n:
        raise DimensionMismatch(f"nonlinearity has n={g.n} but the covariance is {sym.n}x{sym.n}")
    return g, sym


def cmd_pair(args) -> tuple[dict, dict, int]:
    g, sym = _load_problem(args)
    m = GaussianModel(validate_pd(sym))
    cfg = _base_config(args) | {"g": g.label, "cov": sym.data.tolist(), "method": args.method}
    if args.method == "mc":
        cfg |= {"samples": args.samples, "seed": args.seed}
        est = pair_mc(g, m, args.seed, args.samples)
    else:
        q = _quadrature(args, g.n)
        cfg |= {"order": q.order_per_axis, "scheme": q.scheme}
        est = pair(g, m, q)
    return cfg, est.to_json(), EXIT_OK


def cmd_price(args) -> tuple[dict, dict, int]:
    g, sym = _load_problem(args)
    beta = parse_beta(args.beta, g.n)
    q = _quadrature(args, g.n)
    A = omega_unpack(sym)
    cfg = _base_config(args) | {
        "g": g.label, "cov": sym.data.tolist(), "beta": beta.to_json(),
        "order": q.order_per_axis, "scheme": q.scheme,
        "fallback_fd": args.fallback_fd, "fd_step": args.fd_step,
    }
    try:
        est = price_derivative(g, A, beta, q)
    except GausspriceError as exc:
        if not (args.fallback_fd and exc.code == "DerivativeUnavailable"):
            raise
        est = fd_derivative(g, A, beta, args.fd_step, q)
    return cfg, est.to_json(), EXIT_OK


def cmd_verify(args) -> tuple[dict, dict, int]:
    g, sym = _load_problem(args)
    beta = parse_beta(args.beta, g.n)
    q = _quadrature(args, g.n)
    tol = default_tol(g) if args.tol is None else args.tol
    cfg = _base_config(args) | {
        "g": g.label, "cov": sym.data.tolist(), "beta": beta.to_json(),
        "order": q.order_per_axis, "scheme": q.scheme, "tol": tol, "fd_step": args.fd_step,
    }
    rep = verify(g, omega_unpack(sym), beta, tol, args.fd_step, q)
    return cfg, rep.to_json(), EXIT_MISMATCH if rep.verdict == MISMATCH else EXIT_OK


def cmd_mcmahon(args) -> tuple[dict, dict, int]:
    f = parse(args.g)
    q = _quadrature(args, f.n)
    cfg = _base_config(args) | {
        "g": f.label, "alpha": args.alpha, "k": args.k, "order": q.order_per_axis, "scheme": q.scheme,
    }
    return cfg, mcmahon_derivative(f, args.alpha, args.k, q).to_json(), EXIT_OK


def cmd_clip_study(args) -> tuple[dict, str | dict, int]:
    q = _quadrature(args, 2)
    grid = clipstudy.default_grid(args.grid)
    cfg = _base_config(args) | {
        "tau": args.tau, "grid": args.grid, "order": q.order_per_axis, "scheme": q.scheme,
        "figure": args.figure,
    }
    curve = clipstudy.f_tau_curve(args.tau, grid, q)
    if args.figure:
        from .plotting import plot_clip_curve

        try:
            plot_clip_curve(curve, args.figure)
        except OSError as exc:
            raise IoError(f"cannot write figure {args.figure!r}: {exc.strerror}") from None
    if args.format == "csv":
        buf = io.StringIO()
        clipstudy.write_csv(curve, buf, "config: " + json.dumps(cfg, separators=(",", ":")))
        return cfg, buf.getvalue(), EXIT_OK
    return cfg, curve.to_json(), EXIT_OK


def cmd_sample(args) -> tuple[dict, str | dict, int]:
    sym = parse_cov(args.cov)
    m = GaussianModel(validate_pd(sym))
    cfg = _base_config(args) | {"cov": sym.data.tolist(), "samples": args.samples, "seed": args.seed}
    x = sample(m, args.seed, args.samples)
    cols = [f"x{k + 1}" for k in range(m.n)]
    if args.format == "json":
        return cfg, {"columns": cols, "points": x.tolist()}, EXIT_OK
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(cfg, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    w.writerows(["%.17g" % v for v in row] for row in x.tolist())
    return cfg, buf.getvalue(), EXIT_OK


COMMANDS = {
    "pair": cmd_pair,
    "price": cmd_price,
    "verify": cmd_verify,
    "mcmahon": cmd_mcmahon,
    "clip-study": cmd_clip_study,
    "sample": cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gaussprice", description="Gaussian expectations and their covariance derivatives.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, default_format="json"):
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default=default_format)
        sp.add_argument("--order", type=int, help="quadrature order per axis (default: 60 for n<=2, 30 for n=3)")
        sp.add_argument("--scheme", choices=SCHEMES, default="auto")

    def problem(sp):
        sp.add_argument("--g", required=True, help='nonlinearity, e.g. "clip(tau=1)⊗clip(tau=1)"')
        sp.add_argument("--cov", required=True, help="inline:[[1,0.5],[0.5,1]] or a JSON file path")

    sp = sub.add_parser("pair", help="E[g(X)] for X ~ N(0, cov)")
    problem(sp)
    common(sp)
    sp.add_argument("--method", choices=("quad", "mc"), default="quad")
    sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)

    sp = sub.add_parser("price", help="covariance derivative via the Price identity")
    problem(sp)
    common(sp)
    sp.add_argument("--beta", required=True, help='"i,j:k;..." with 1-based i <= j')
    sp.add_argument("--fallback-fd", action="store_true",
                    help="use finite differences when the weak derivative is not in the catalog")
    sp.add_argument("--fd-step", type=float, default=DEFAULT_FD_STEP)

    sp = sub.add_parser("verify", help="compare the Price derivative with finite differences")
    problem(sp)
    common(sp)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--tol", type=float, help="default 1e-6 for smooth g, 1e-4 otherwise")
    sp.add_argument("--fd-step", type=float, default=DEFAULT_FD_STEP)

    sp = sub.add_parser("mcmahon", help="k-th alpha-derivative of E[f(X, Y)] at correlation alpha")
    sp.add_argument("--g", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--k", type=int, default=1)
    common(sp)

    sp = sub.add_parser("clip-study", help="clipping correlator curve and its closed-form F''")
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--grid", type=int, default=clipstudy.DEFAULT_GRID_POINTS, help="uniform points on [-1, 1]")
    sp.add_argument("--figure", help="also render a figure to this path (png, pdf, svg)")
    common(sp, default_format="csv")

    sp = sub.add_parser("sample", help="draws from N(0, cov), one point per row")
    sp.add_argument("--cov", required=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "fd_step", 1.0) <= 0:
            raise InvalidParameter("--fd-step must be positive")
        if getattr(args, "samples", 2) < 2:
            raise InvalidParameter("--samples must be at least 2")
        cfg, result, status = COMMANDS[args.command](args)
        text = result if isinstance(result, str) else render(cfg, result, args.format)
        _emit(text, args.out)
        return status
    except GausspriceError as exc:
        msg = " ".join(str(exc).split())
        sys.stderr.write(f"ERROR {exc.code}: {msg}\n")
        return EXIT_INPUT


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
