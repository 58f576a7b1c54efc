"""Command-line interface: ``dnchar {solve,check,reconstruct,topology}``.

Exit codes: 0 success or verdict pass, 1 verdict fail, 2 verdict uncertain
(only the condition iii surrogate or an inconclusive search is unconfirmed),
64 usage error, 65 bad input data, 70 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .boundary import GridSpec
from .characterization import CheckConfig, fem_config, full_report
from .errors import DegenerateMesh, DNCharError, NotRealOperator
from .meshes import mesh_disk, mesh_torus_minus_cap, read_off
from .operators import TolPolicy
from .recon import Reconstruction, reconstruct
from .serialize import FormatError, dumps, load_operator, save_operator, write_atomic
from .solvers import dn_disk, fourier_dn_from_mesh
from .topology import topology_of

EX_OK, EX_FAIL, EX_UNCERTAIN = 0, 1, 2
EX_USAGE, EX_DATAERR, EX_SOFTWARE = 64, 65, 70

log = logging.getLogger("dnchar")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one invocation; all sampled checks derive from ``seed``."""
    command: str
    inputs: tuple
    outputs: tuple
    modes: int | None
    tol: float | None
    points: int | None
    grid: int | None
    seed: int
    threads: int
    json_indent: int | None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        get = lambda k: getattr(args, k, None)
        inputs = tuple(str(p) for p in (get("operator"), get("mesh")) if p is not None)
        outputs = tuple(str(p) for p in (get("out"), get("report"), get("svg"), get("summary"))
                        if p is not None)
        return cls(args.command, inputs, outputs, get("modes"), get("tol"), get("points"),
                   get("grid"), args.seed, args.threads, _indent(args))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json-indent", type=int, default=2,
                        help="indentation of JSON output, negative for compact (default 2)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled checks (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")

    p = _Parser(prog="dnchar", description="Characterize Dirichlet-to-Neumann operators "
                "and read off the surface behind them.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common], help="produce a DN operator")
    s.add_argument("--surface", default="disk", metavar="{disk,disk-fem,torus,PATH.off}",
                   help="closed-form disk, FEM disk, FEM torus minus a cap, or an OFF mesh "
                        "file (default disk)")
    s.add_argument("--modes", type=int, default=16, help="truncation order N (default 16)")
    s.add_argument("--h", type=float, default=0.1, help="mesh size for FEM surfaces (default 0.1)")
    s.add_argument("--R", type=float, default=2.0, help="torus major radius (default 2)")
    s.add_argument("--r", type=float, default=1.0, help="torus minor radius (default 1)")
    s.add_argument("--cap", type=float, default=None, help="cap radius (default 2.2 r)")
    s.add_argument("--mesh", type=Path, help="OFF file (same as passing it to --surface)")
    s.add_argument("--out", type=Path, required=True, help="operator JSON to write")

    c = sub.add_parser("check", parents=[common], help="run conditions i..vii")
    c.add_argument("operator", type=Path)
    c.add_argument("--report", type=Path, help="report JSON to write (default stdout)")
    c.add_argument("--tol", type=float, default=None,
                   help="relative tolerance (default 1e-8, or measured for FEM operators)")
    c.add_argument("--points", type=int, default=8,
                   help="boundary points for condition vi (default 8)")
    c.add_argument("--fem", choices=["auto", "yes", "no"], default="auto",
                   help="FEM-scaled tolerances (default auto: from the operator metadata)")

    r = sub.add_parser("reconstruct", parents=[common], help="winding-field image region")
    r.add_argument("operator", type=Path)
    r.add_argument("--grid", type=int, default=256, help="grid resolution per axis (default 256)")
    r.add_argument("--out", type=Path, help="CSV of cell centers and windings (x, y, d)")
    r.add_argument("--svg", type=Path, help="SVG rendering of the region and curve")
    r.add_argument("--summary", type=Path, help="summary JSON (default stdout)")

    t = sub.add_parser("topology", parents=[common], help="handle rank, Euler characteristic, genus")
    t.add_argument("operator", type=Path)
    t.add_argument("--gap-factor", type=float, default=None,
                   help="required singular-value gap (default 1e3, or 10 for FEM operators)")
    t.add_argument("--out", type=Path, help="JSON to write (default stdout)")
    return p


def _indent(args) -> int | None:
    return None if args.json_indent < 0 else args.json_indent


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _is_fem(op, flag: str = "auto") -> bool:
    if flag != "auto":
        return flag == "yes"
    return op.meta.get("source") == "fem"


def cmd_solve(args) -> int:
    if args.mesh is not None and args.surface == "disk":
        args.surface = "mesh"
    if args.surface == "disk":
        op = dn_disk(GridSpec(args.modes))
    else:
        if args.surface == "disk-fem":
            mesh = mesh_disk(args.h)
        elif args.surface == "torus":
            mesh = mesh_torus_minus_cap(args.R, args.r, args.h, args.cap)
        else:
            path = args.mesh if args.surface == "mesh" else Path(args.surface)
            if path is None:
                raise UsageError("solve --surface mesh needs --mesh")
            if path.suffix.lower() != ".off" and not path.exists():
                raise UsageError(f"unknown surface {args.surface!r}")
            try:
                mesh = read_off(path)
            except (OSError, ValueError, DegenerateMesh) as exc:
                raise FormatError(f"cannot use mesh {path}: {exc}") from exc
        op = fourier_dn_from_mesh(mesh, args.modes)
        op = op.with_matrix(op.matrix, source="fem", surface=args.surface, h=args.h)
    save_operator(op, args.out, _indent(args))
    log.info("wrote %s (N=%d, L=%.12g)", args.out, op.grid.modes, op.grid.length)
    return EX_OK


def cmd_check(args) -> int:
    op = load_operator(args.operator)
    if _is_fem(op, args.fem) and op.real_flag:
        cfg = fem_config(op)
    else:
        cfg = CheckConfig()
    cfg = replace(cfg, seed=args.seed, boundary_points=args.points)
    if args.tol is not None:
        cfg = replace(cfg, tol=args.tol, rank_rel=args.tol)
    log.info("tolerance %.3g, kernel policy %s", cfg.tol, cfg.kernel_policy.to_dict())
    report = full_report(op, cfg)
    _emit(dumps(report.to_dict(), _indent(args)), args.report)
    print(f"verdict: {report.verdict}" + (f" (first failure: {report.first_failure})"
                                          if report.first_failure else ""), file=sys.stderr)
    return {"pass": EX_OK, "fail": EX_FAIL}.get(report.verdict, EX_UNCERTAIN)


def region_csv(rec: Reconstruction) -> str:
    fld = rec.region.field
    xs, ys = fld.centers()
    lines = ["x,y,d"]
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            lines.append(f"{x:.9g},{y:.9g},{int(fld.values[i, j])}")
    return "\n".join(lines) + "\n"


def region_svg(rec: Reconstruction, size: int = 512) -> str:
    """Filled region ``d > 0`` with the curve ``eta(Gamma)`` drawn on top."""
    fld = rec.region.field
    x0, x1, y0, y1 = fld.box
    scale = size / max(x1 - x0, y1 - y0)
    w, h = (x1 - x0) * scale, (y1 - y0) * scale

    def pt(x, y):
        return f"{(x - x0) * scale:.2f},{(y1 - y) * scale:.2f}"

    region = " ".join("M" + " L".join(pt(x, y) for x, y in line) + " Z"
                      for line in rec.region.polylines)
    curve = np.append(fld.curve[:: max(1, len(fld.curve) // 2000)], fld.curve[0])
    path = "M" + " L".join(pt(z.real, z.imag) for z in curve)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
            f'viewBox="0 0 {w:.2f} {h:.2f}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n'
            f'<path d="{region}" fill="#9ecae1" fill-rule="evenodd" stroke="none"/>\n'
            f'<path d="{path}" fill="none" stroke="#08306b" stroke-width="1.5"/>\n'
            f'<text x="8" y="18" font-family="sans-serif" font-size="13">'
            f'area {rec.region.area:.5g}, max d = {rec.region.multiplicity}</text>\n'
            f'</svg>\n')


def cmd_reconstruct(args) -> int:
    op = load_operator(args.operator)
    if not op.real_flag:
        raise NotRealOperator("operator is not real")
    policy = fem_config(op).kernel_policy if _is_fem(op) else TolPolicy()
    rec = reconstruct(op, resolution=args.grid, policy=policy, seed=args.seed,
                      threads=args.threads)
    if args.out:
        write_atomic(args.out, region_csv(rec))
    if args.svg:
        write_atomic(args.svg, region_svg(rec))
    _emit(dumps(rec.summary(), _indent(args)), args.summary)
    return EX_OK


def cmd_topology(args) -> int:
    op = load_operator(args.operator)
    if not op.real_flag:
        raise NotRealOperator("operator is not real")
    gap = args.gap_factor or (10.0 if _is_fem(op) else 1e3)
    log.info("handle rank gap factor %g", gap)
    res = topology_of(op, TolPolicy(mode="gap", gap_factor=gap))
    _emit(dumps(res.to_dict(), _indent(args)), args.out)
    return EX_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "reconstruct": cmd_reconstruct,
            "topology": cmd_topology}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return EX_USAGE
    except SystemExit as exc:          # --help
        return EX_OK if not exc.code else EX_USAGE
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.info("run %s", RunConfig.from_args(args))
    if args.threads < 1:
        print("dnchar: --threads must be positive", file=sys.stderr)
        return EX_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dnchar: {exc}", file=sys.stderr)
        return EX_USAGE
    except (FormatError, NotRealOperator) as exc:
        print(f"dnchar: bad input: {exc}", file=sys.stderr)
        return EX_DATAERR
    except (DNCharError, np.linalg.LinAlgError) as exc:
        print(f"dnchar: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
