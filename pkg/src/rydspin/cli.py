"""Command-line front end.

    rydspin <command> --config run.ini [--out PATH] [options]

Commands: couplings, angular, pair-energies, lattice, design, verify.
Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.  Warnings go to stderr; ``--strict`` turns them
into exit code 2.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .design import format_report, optimize
from .dressing import characteristic_radii, spin_couplings
from .exceptions import ConfigError, InfeasibleError, InvalidArgumentError, NotFoundError, PoleError, ResonanceError
from .lattice import assemble_hamiltonian, coupling_table, dump_terms, generate_lattice, ground_state_small, symmetry_report, write_coupling_csv
from .pair import BRANCHES, bo_branches, bo_spectrum_closed_form, find_resonances
from .vdw import PairGeometry
from .verify import run_checks

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
_NUMERIC_ERRORS = (PoleError, ResonanceError, NotFoundError, InfeasibleError)
COUPLING_HEADER = "r_um,theta_rad,J_z,J_par,J_pm,J_pp,valid_flag"


class _Warnings:
    def __init__(self):
        self.items: list[str] = []

    def __call__(self, msg: str):
        self.items.append(msg)
        print(f"warning: {msg}", file=sys.stderr)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _radial_grid(cfg: RunConfig) -> np.ndarray:
    s = cfg.scan
    if s.spacing == "log":
        return np.geomspace(s.r_min, s.r_max, s.n_r)
    return np.linspace(s.r_min, s.r_max, s.n_r)


def _coupling_row(r, theta, cfg, warn):
    s = cfg.scan
    try:
        c = spin_couplings(PairGeometry(float(r), float(theta)), cfg.drive, cfg.channels, method=s.method,
                           light_shifts_mode=s.light_shifts, eps_max=s.eps_max)
    except (PoleError, ResonanceError) as exc:
        warn(f"r={r:.6g} um, theta={theta:.6g} rad: {exc}")
        return [r, theta] + [math.nan] * 4, "resonance"
    if not c.valid:
        warn(f"r={r:.6g} um, theta={theta:.6g} rad: {c.diagnostic}")
    return [r, theta, *c.as_array()], "1" if c.valid else "0"


def _write_rows(out, header, units, rows):
    out.write(f"# units: {units}\n")
    out.write(header + "\n")
    for vals, flag in rows:
        cells = [_fmt(v) for v in vals]
        if flag is not None:
            cells.append(flag)
        out.write(",".join(cells) + "\n")


_COUPLING_UNITS = "r_um um, theta_rad rad, J 2pi*MHz, valid_flag 1|0|resonance"


def cmd_couplings(cfg: RunConfig, out, warn) -> int:
    rows = [_coupling_row(r, cfg.scan.theta, cfg, warn) for r in _radial_grid(cfg)]
    _write_rows(out, COUPLING_HEADER, _COUPLING_UNITS, rows)
    return EXIT_OK


def cmd_angular(cfg: RunConfig, out, warn) -> int:
    s = cfg.scan
    rs = _radial_grid(cfg)
    thetas = np.linspace(s.theta_min, s.theta_max, s.n_theta)
    rows = []
    for th in thetas:
        flagged = set()
        if cfg.drive.omega_p or cfg.drive.omega_m:
            for res in find_resonances(cfg.drive, cfg.channels, float(th), (s.r_min, s.r_max)):
                i = int(np.argmin(np.abs(rs - res.rho)))
                flagged.add(i)
                warn(f"theta={th:.6g} rad: branch {res.branch} crosses zero at r={res.rho:.6g} um")
        for i, r in enumerate(rs):
            if i in flagged:
                rows.append(([r, th] + [math.nan] * 4, "resonance"))
            else:
                rows.append(_coupling_row(r, th, cfg, warn))
    _write_rows(out, COUPLING_HEADER, _COUPLING_UNITS, rows)
    return EXIT_OK


def cmd_pair_energies(cfg: RunConfig, out, warn) -> int:
    d, p = cfg.drive, cfg.pair
    d.require_detunings()
    r_c = characteristic_radii(d, cfg.channels).r_c
    xs = np.geomspace(p.x_min, p.x_max, p.n_x)
    rhos = xs * r_c
    if abs(math.cos(p.theta)) < 1e-12:
        energies = np.array([[bo_spectrum_closed_form(r, d, cfg.channels).energy(b) for b in BRANCHES] for r in rhos])
    else:
        energies, _ = bo_branches(rhos, d, cfg.channels, p.theta)
    single = (-d.delta_p, -d.delta_m)
    header = "x,rho_um," + ",".join(f"E_{b.replace('+', 'p').replace('-', 'm')}" for b in BRANCHES) + ",E_single_p,E_single_m"
    out.write(f"# r_c_um = {_fmt(r_c)}\n")
    rows = [([x, r, *e, *single], None) for x, r, e in zip(xs, rhos, energies)]
    _write_rows(out, header, "x = rho/r_c, rho_um um, E 2pi*MHz", rows)
    return EXIT_OK


def _lattice_report(cfg: RunConfig, table, lat, warn, terms_path=None) -> list[str]:
    ls = cfg.lattice
    lines = [
        f"lattice.kind = {lat.kind}",
        f"lattice.sites = {lat.n_sites}",
        f"lattice.bonds = {len(table)}",
        f"lattice.shells = {table.cutoff_shells}",
        f"truncation_bound = {_fmt(table.truncation_bound)}",
        f"all_valid = {str(table.all_valid).lower()}",
    ]
    for c, b in zip(table.couplings, table.bonds):
        if not c.valid:
            warn(f"bond ({b.i}, {b.j}): {c.diagnostic}")
    if lat.n_sites > ls.cap:
        warn(f"{lat.n_sites} sites exceed cap {ls.cap}; no many-body Hamiltonian assembled")
        return lines
    h = assemble_hamiltonian(lat, table, cap=ls.cap)
    if terms_path:
        with open(terms_path, "w", encoding="utf-8", newline="") as fh:
            dump_terms(h, fh)
    rep = symmetry_report(h)
    for k, v in rep.as_dict().items():
        lines.append(f"symmetry.{k} = {_fmt(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v}")
    if ls.ground_state:
        gs = ground_state_small(h, cap=ls.cap)
        lines += [f"ground_state.energy = {_fmt(gs.energy)}", f"ground_state.degeneracy = {gs.degeneracy}",
                  f"ground_state.method = {gs.method}"]
        if gs.magnetization is not None:
            lines.append(f"ground_state.magnetization = {_fmt(gs.magnetization)}")
    return lines


def _require_lattice(cfg: RunConfig):
    if cfg.lattice is None:
        raise ConfigError(f"{cfg.path or '<config>'}: this command needs a [lattice] section")
    ls = cfg.lattice
    return generate_lattice(ls.kind, ls.spacing, ls.extent, periodic=ls.periodic)


def _table(cfg, lat, drive):
    ls = cfg.lattice
    return coupling_table(lat, drive, cfg.channels, ls.shells, tilt=ls.tilt, phase_gauge=ls.phase_gauge,
                          method=cfg.scan.method, eps_max=cfg.scan.eps_max)


def _write_report(lines, path, fallback):
    text = "".join(f"{ln}\n" for ln in lines)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        fallback.write("".join(f"# {ln}\n" for ln in lines))


def cmd_lattice(cfg: RunConfig, out, warn, report=None, terms=None) -> int:
    lat = _require_lattice(cfg)
    table = _table(cfg, lat, cfg.drive)
    write_coupling_csv(table, out)
    _write_report(_lattice_report(cfg, table, lat, warn, terms), report, out)
    return EXIT_OK


def cmd_design(cfg: RunConfig, out, warn, report=None) -> int:
    if cfg.design is None:
        raise ConfigError(f"{cfg.path or '<config>'}: the design command needs a [design] section")
    ds = cfg.design
    lat = _require_lattice(cfg) if cfg.lattice is not None else None
    res = optimize(ds.target, cfg.channels, lat, cfg.drive, max_iter=ds.max_iter, restarts=ds.restarts,
                   rng_seed=ds.seed, eps_max=cfg.scan.eps_max, method=cfg.scan.method)
    for v in res.violations:
        warn(v)
    text = format_report(res)
    if report:
        with open(report, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write("".join(f"# {ln}\n" if not ln.startswith("#") else f"{ln}\n" for ln in text.splitlines()))
    if lat is not None:
        write_coupling_csv(_table(cfg, lat, res.drive), out)
    else:
        cmd_couplings(replace(cfg, drive=res.drive), out, warn)
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_verify(cfg: RunConfig, out, warn) -> int:
    v = cfg.verify
    rep = run_checks(cfg.drive, cfg.channels, (v.rho_min, v.rho_max), v.n_rho)
    for w in rep["warnings"]:
        warn(w)
    rep["config"] = {"drive": cfg.drive.as_dict(), "channels": cfg.channels_ref}
    out.write(json.dumps(_jsonable(rep), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if rep["pass"] else EXIT_VERIFY


COMMANDS = {
    "couplings": cmd_couplings,
    "angular": cmd_angular,
    "pair-energies": cmd_pair_energies,
    "lattice": cmd_lattice,
    "design": cmd_design,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydspin", description="Rydberg-dressed spin couplings")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="run configuration (INI)")
        s.add_argument("--out", help="output file (default stdout)")
        s.add_argument("--grid", type=int, help="override the number of radial points")
        s.add_argument("--strict", action="store_true", help="treat warnings as errors (exit 2)")
        if name in ("lattice", "design"):
            s.add_argument("--shells", type=int, help="override the number of neighbour shells")
            s.add_argument("--report", help="write the key-value report to this file")
        if name == "lattice":
            s.add_argument("--terms", help="write the Hamiltonian term list to this file")
        if name == "design":
            s.add_argument("--seed", type=int, help="override the restart RNG seed")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        cfg = replace(cfg, scan=replace(cfg.scan, n_r=args.grid), pair=replace(cfg.pair, n_x=args.grid),
                      verify=replace(cfg.verify, n_rho=args.grid))
    if getattr(args, "shells", None) is not None:
        if args.shells < 1 or cfg.lattice is None:
            raise ConfigError("--shells needs a positive value and a [lattice] section")
        cfg = replace(cfg, lattice=replace(cfg.lattice, shells=args.shells))
    if getattr(args, "seed", None) is not None and cfg.design is not None:
        cfg = replace(cfg, design=replace(cfg.design, seed=args.seed))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warn = _Warnings()
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    extra = {}
    if args.command in ("lattice", "design"):
        extra["report"] = args.report
    if args.command == "lattice":
        extra["terms"] = args.terms
    try:
        with contextlib.ExitStack() as stack:
            out = stack.enter_context(open(args.out, "w", encoding="utf-8", newline="")) if args.out else sys.stdout
            code = COMMANDS[args.command](cfg, out, warn, **extra)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.strict and warn.items and code == EXIT_OK:
        print(f"error: {len(warn.items)} warning(s) under --strict", file=sys.stderr)
        return EXIT_NUMERIC
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
