"""Command-line front end: ``ddbounds {solve,sweep,lbic,bounds,dump-mesh} CONFIG``.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 hard bound violation (non-positive density or n_a >= S_a).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bounds as B
from .config import ConfigError, dumps_config, load_config, parse_values
from .fvm import DiscreteSystem
from .newton import NewtonError
from .output import Manifest, lbic_table, profile_table, sweep_table, write_csv
from .mesh import write_mesh_dump
from .scenarios import (
    current_report,
    lbic_scan,
    line_positions,
    parameter_sweep,
    solve_scenario,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_BOUNDS = 0, 1, 2, 3


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="config file or bundled config name")
    common.add_argument("--out", help="output directory (default: [output] directory)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry, e.g. solver.max_iter=5")
    common.add_argument("--threads", type=int, default=1, help="worker threads for scans")

    p = argparse.ArgumentParser(prog="ddbounds", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one scenario, write profile.csv")
    sw = sub.add_parser("sweep", parents=[common], help="parameter sweep, write sweep.csv")
    sw.add_argument("--param", choices=["lambda", "C", "G0", "V"])
    sw.add_argument("--values", help="a:b:logN, a:b:linN or a comma list")
    lb = sub.add_parser("lbic", parents=[common], help="beam scan, write lbic.csv")
    lb.add_argument("--line", help="scan line, e.g. y=2")
    lb.add_argument("--full-grid", action="store_true", help="scan every mesh node")
    sub.add_parser("bounds", parents=[common], help="print the bound certificate")
    sub.add_parser("dump-mesh", parents=[common], help="write mesh.txt")
    return p


def _outdir(args, cfg):
    d = Path(args.out if args.out else cfg.output["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _certificate_lines(cert):
    return [f"{k} {v!r}" for k, v in cert.as_dict().items()]


def cmd_solve(args, cfg):
    sc = cfg.build_scenario()
    out = _outdir(args, cfg)
    man = Manifest("solve")
    man.config(dumps_config(cfg))
    try:
        chain = solve_scenario(sc, cfg.newton(), int(cfg.solver["voltage_steps"]),
                               float(cfg.solver["g_start"]))
    except NewtonError as exc:
        man.section("failure")
        man.add(type(exc).__name__, str(exc))
        man.write(out / "manifest.txt")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    man.solve_chain(chain)
    cols, rows = profile_table(chain.system, chain.state)
    if cfg.output["profile"]:
        write_csv(out / "profile.csv", cols, rows)
    cur = current_report(chain.system, chain.state)
    man.section("currents")
    for tag in sorted(cur.boundary):
        man.add(tag, "boundary", cur.boundary[tag], "volume", cur.volume[tag],
                "K", cur.k_bound[tag])
    man.add("conservation_error", cur.conservation_error, "scale", cur.scale)
    cert = B.system_certificate(chain.system, **cfg.bound_kw())
    verdict = B.verify_solution_bounds(chain.state, cert, chain.system)
    man.section("certificate")
    man.lines += _certificate_lines(cert)
    man.section("verdict")
    man.lines += verdict.lines()
    if cfg.output["manifest"]:
        man.write(out / "manifest.txt")
    print(f"converged in {chain.iterations} Newton steps; I(contact2) = {cur.boundary.get('contact2', 0.0)!r}")
    if not verdict.hard_ok:
        print("hard bound violation: " + "; ".join(verdict.failures), file=sys.stderr)
        return EXIT_BOUNDS
    return EXIT_OK


def cmd_sweep(args, cfg):
    param = args.param or cfg.sweep["parameter"]
    values = parse_values(args.values) if args.values else cfg.sweep["values"]
    sc = cfg.build_scenario()
    out = _outdir(args, cfg)
    rows = parameter_sweep(sc, param, values, cfg.newton(), cfg.bound_kw())
    cols, table = sweep_table(rows)
    write_csv(out / "sweep.csv", cols, table)
    man = Manifest("sweep")
    man.config(dumps_config(cfg))
    man.add("parameter", param)
    man.add("values", *values)
    for r in rows:
        man.add("row", r.value, "ok", r.ok, r.error or "")
    man.write(out / "manifest.txt")
    if any(r.error for r in rows):
        return EXIT_SOLVER
    if not all(r.verdict.hard_ok for r in rows):
        return EXIT_BOUNDS
    return EXIT_OK


def _parse_line(spec):
    key, _, val = spec.partition("=")
    if key.strip() != "y" or not val:
        raise ConfigError(f"--line expects y=VALUE, got {spec!r}")
    return float(val)


def cmd_lbic(args, cfg):
    sc = cfg.build_scenario()
    if sc.params.get("family") != "lbic":
        raise ConfigError("lbic needs a config with family = \"lbic\"")
    out = _outdir(args, cfg)
    if args.full_grid or cfg.scan["full_grid"]:
        positions = [tuple(float(c) for c in x) for x in sc.mesh.nodes]
    else:
        y = _parse_line(args.line) if args.line else float(cfg.scan["line_y"])
        positions = line_positions(y, sc.mesh)
    sig = lbic_scan(positions, sc, cfg.newton(), threads=max(1, args.threads),
                    contact=cfg.scan["contact"])
    cols, rows = lbic_table(sig)
    write_csv(out / "lbic.csv", cols, rows)
    man = Manifest("lbic")
    man.config(dumps_config(cfg))
    man.add("positions", len(positions))
    for f in sig.failures:
        man.add("failure", f)
    man.write(out / "manifest.txt")
    if sig.failures:
        print(f"{len(sig.failures)} beam positions failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_bounds(args, cfg):
    sc = cfg.build_scenario()
    sys_ = DiscreteSystem(sc)
    cert = B.system_certificate(sys_, **cfg.bound_kw())
    for line in _certificate_lines(cert):
        print(line)
    return EXIT_OK


def cmd_dump_mesh(args, cfg):
    sc = cfg.build_scenario()
    out = _outdir(args, cfg)
    write_mesh_dump(sc.mesh, out / "mesh.txt")
    print(f"{sc.mesh.n_nodes} nodes written to {out / 'mesh.txt'}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "lbic": cmd_lbic,
    "bounds": cmd_bounds,
    "dump-mesh": cmd_dump_mesh,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(args.overrides)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
