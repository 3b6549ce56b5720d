"""Command line interface.

Subcommands: counts, dump-system, build, certify, spy.  All outputs are
deterministic ASCII; certify writes the JSON certificate plus the evaluated
matrices and their nonzero-distribution figures into an output directory.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .multiindex import count_E, count_F, count_G, count_H
from .poly import DerivationParams
from . import poly
from .pipeline import (
    DEFAULT_POINT,
    certificate_to_json,
    run_certify,
)
from .modrank import DEFAULT_PRIMES


def _parse_point(text: str) -> tuple[Fraction, ...]:
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("point needs 5 comma-separated values")
    return tuple(Fraction(p.strip()) for p in parts)


def _parse_fraction(text: str) -> Fraction:
    return Fraction(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jetcert",
        description="exact structural-rank certification for the prolonged "
        "adjoint flow system",
    )
    ap.add_argument("--version", action="version", version=f"jetcert {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_counts = sub.add_parser("counts", help="print the E/F/G/H counting table")
    p_counts.add_argument("--max-level", type=int, default=22)
    p_counts.add_argument("--sep", default=",", help="field separator")

    p_dump = sub.add_parser(
        "dump-system", help="print the eliminated three-equation system"
    )
    p_dump.add_argument("--nu", type=_parse_fraction, default=Fraction(1))

    p_build = sub.add_parser("build", help="prolong and serialize the matrix")
    p_build.add_argument("--levels", type=int, default=19)
    p_build.add_argument("--nu", type=_parse_fraction, default=Fraction(1))
    p_build.add_argument("--threads", type=int, default=1)
    p_build.add_argument("--out", required=True)
    p_build.add_argument(
        "--format",
        choices=("polymtx", "mtx"),
        default="polymtx",
        help="polymtx: symbolic entries; mtx: evaluated at --point",
    )
    p_build.add_argument("--point", type=_parse_point, default=DEFAULT_POINT)

    p_cert = sub.add_parser("certify", help="run the full certification chain")
    p_cert.add_argument("--levels", type=int, default=19)
    p_cert.add_argument("--nu", type=_parse_fraction, default=Fraction(1))
    p_cert.add_argument("--point", type=_parse_point, default=DEFAULT_POINT)
    p_cert.add_argument("--prime", type=int, action="append", default=None,
                        help="certification prime(s); may repeat")
    p_cert.add_argument("--threads", type=int, default=1)
    p_cert.add_argument("--out-dir", required=True)
    p_cert.add_argument(
        "--format",
        choices=("mtx", "polymtx", "json"),
        action="append",
        default=None,
        help="extra matrix serializations to write (json certificate always)",
    )
    p_cert.add_argument("--no-figures", action="store_true",
                        help="skip the nonzero-distribution figures")
    p_cert.add_argument("--quiet", action="store_true")

    p_spy = sub.add_parser(
        "spy", help="render a nonzero-distribution figure from a matrix file"
    )
    p_spy.add_argument("matrix", help="Matrix Market file (rational entries)")
    p_spy.add_argument("--out", required=True, help="output .png/.svg/.pgm")
    p_spy.add_argument("--title", default=None)
    p_spy.add_argument("--bins", type=int, default=512, help="pgm raster bins")
    return ap


def cmd_counts(args) -> int:
    sep = args.sep
    print(sep.join(["n", "E", "F", "G", "H"]))
    for n in range(args.max_level + 1):
        print(sep.join(str(v) for v in (n, count_E(n), count_F(n), count_G(n), count_H(n))))
    return 0


def cmd_dump_system(args) -> int:
    from .system import build_eliminated_system

    params = DerivationParams(nu=args.nu)
    for idx, eq in enumerate(build_eliminated_system(params), start=1):
        print(f"equation {idx}")
        for (unknown, mi), coeff in sorted(
            eq.lhs.items(), key=lambda kv: (kv[0][0], tuple(kv[0][1]))
        ):
            print(f"  lhs {unknown} d{tuple(mi)}: {poly.to_text(coeff)}")
        for (unknown, mi), coeff in sorted(
            eq.rhs.items(), key=lambda kv: (kv[0][0], tuple(kv[0][1]))
        ):
            print(f"  rhs {unknown} d{tuple(mi)}: {poly.to_text(coeff)}")
    return 0


def cmd_build(args) -> int:
    from .prolong import build_main_matrix
    from .formats import write_polymtx, write_matrix_market
    from .structural import evaluate_matrix

    params = DerivationParams(nu=args.nu)
    pm = build_main_matrix(n=args.levels, params=params, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "polymtx":
        write_polymtx(pm, out)
    else:
        rm, _ = evaluate_matrix(pm, args.point)
        write_matrix_market(
            rm,
            out,
            comments=(
                f"prolonged system, levels {args.levels}",
                "point " + ",".join(str(v) for v in args.point),
            ),
        )
    print(f"wrote {out} ({pm.nrows}x{pm.ncols})")
    return 0


def cmd_certify(args) -> int:
    from .formats import sha256_file, write_matrix_market, write_polymtx
    from .report import spy_plot

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = DerivationParams(nu=args.nu)
    primes = tuple(args.prime) if args.prime else DEFAULT_PRIMES
    say = (lambda msg: None) if args.quiet else (
        lambda msg: print(f"[certify] {msg}", flush=True)
    )
    result = run_certify(
        levels=args.levels,
        params=params,
        point=args.point,
        primes=primes,
        threads=args.threads,
        keep_matrices=True,
        progress=say,
    )

    artifacts: dict[str, str] = {}
    rm = result.rm
    formats = args.format or ["mtx"]
    if rm is not None and "mtx" in formats:
        path = out_dir / "evaluated.mtx"
        write_matrix_market(rm, path, comments=("evaluated prolonged system",))
        artifacts[path.name] = sha256_file(path)
        if result.p_cols:
            psub = rm.submatrix(result.p_rows, result.p_cols)
            ppath = out_dir / "certified_block.mtx"
            write_matrix_market(psub, ppath, comments=("certified invertible block",))
            artifacts[ppath.name] = sha256_file(ppath)
    if result.pm is not None and "polymtx" in formats:
        path = out_dir / "symbolic.polymtx"
        write_polymtx(result.pm, path)
        artifacts[path.name] = sha256_file(path)
    if rm is not None and not args.no_figures:
        spy_plot(rm, out_dir / "matrix_nonzeros.png",
                 title="evaluated prolonged system")
        if result.p_cols:
            psub = rm.submatrix(result.p_rows, result.p_cols)
            spy_plot(psub, out_dir / "certified_block_nonzeros.png",
                     title="certified block")

    if result.decomposition is not None:
        import json as _json

        dm_path = out_dir / "decomposition.json"
        dm_path.write_text(_json.dumps(result.decomposition, sort_keys=True) + "\n")
        artifacts[dm_path.name] = sha256_file(dm_path)

    result.certificate["artifacts"] = artifacts
    cert_path = out_dir / "certificate.json"
    cert_path.write_text(certificate_to_json(result.certificate))

    for check in result.checks:
        print(f"{check.status.upper():5s} {'hard' if check.hard else 'soft'}  "
              f"{check.name}: expected {check.expected}, got {check.actual}")
    print(f"conclusion: {result.certificate['conclusion']} -> {cert_path}")
    return result.exit_code


def cmd_spy(args) -> int:
    from .formats import read_matrix_market
    from .report import spy_plot, write_pgm_density

    rm = read_matrix_market(args.matrix)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix.lower() == ".pgm":
        write_pgm_density(rm, out, max_bins=args.bins)
    else:
        spy_plot(rm, out, title=args.title)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "counts": cmd_counts,
        "dump-system": cmd_dump_system,
        "build": cmd_build,
        "certify": cmd_certify,
        "spy": cmd_spy,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
