"""Command-line front end.

Subcommands: fixed-point, scan, collapse, switch-report, geometry-dump.
Options can also come from a key=value config file (--config); explicit
flags win over file entries. Outputs carry a header with the config hash
and code version but no timestamps, so identical configurations produce
byte-identical files regardless of worker count.

Exit codes: 0 success, 1 configuration/validation failure, 2 numerical
failure.
"""

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, fields

from . import __version__
from .entanglement import block_entanglement_vs_size, central_block_entropy
from .errors import ConfigError, NumericalError
from .lattice import build_block_geometry
from .rg import find_fixed_point, linearized_slope, nu_from_linearization
from .scaling import (
    OBSERVABLES,
    EntanglementCurve,
    PointFailure,
    default_u_grid,
    fit_collapse,
    read_curves_csv,
    scan_reports,
    transition_width,
    write_curves_csv,
)

import numpy as np


@dataclass
class RunConfig:
    subcommand: str
    u_min: float = None
    u_max: float = None
    u_count: int = 41
    levels: tuple = (0, 1, 2, 3, 4, 5)
    observables: tuple = OBSERVABLES
    single_base: str = "e"
    workers: int = 1
    output: str = None
    output_dir: str = "."
    bracket_lo: float = 5.0
    bracket_hi: float = 25.0
    bisect_tol: float = 1e-6
    as_json: bool = False
    curves: str = None
    observable: str = "E_bb"
    init_uc: float = None
    init_nu: float = 1.0
    init_ye: float = 0.0
    free: tuple = ("uc", "nu")
    max_evals: int = 2000
    u_below: float = None
    u_above: float = None
    level: int = 5
    block_scan: bool = True
    total_level: int = 8

    def validate(self):
        def bad(field_name, why):
            raise ConfigError(f"invalid value for '{field_name}': {why}")

        if self.u_count < 1:
            bad("u_count", f"must be >= 1, got {self.u_count}")
        if (self.u_min is None) != (self.u_max is None):
            bad("u_min/u_max", "give both ends of the grid or neither")
        if self.u_min is not None:
            if self.u_min < 0:
                bad("u_min", f"must be >= 0, got {self.u_min}")
            if not self.u_min < self.u_max:
                bad("u_max", f"must exceed u_min, got ({self.u_min}, {self.u_max})")
        if not self.levels:
            bad("levels", "must be nonempty")
        for lv in self.levels:
            if not 0 <= lv <= 8:
                bad("levels", f"each level must be in [0, 8], got {lv}")
        for obs in self.observables:
            if obs not in OBSERVABLES:
                bad("observables", f"unknown observable {obs!r}")
        if self.single_base not in ("e", "2"):
            bad("single_base", f"must be 'e' or '2', got {self.single_base!r}")
        if not 1 <= self.workers <= 64:
            bad("workers", f"must be in [1, 64], got {self.workers}")
        if not 0 <= self.bracket_lo < self.bracket_hi:
            bad("bracket", f"need 0 <= lo < hi, got ({self.bracket_lo}, {self.bracket_hi})")
        if self.bisect_tol <= 0:
            bad("bisect_tol", f"must be positive, got {self.bisect_tol}")
        if self.max_evals < 1:
            bad("max_evals", f"must be >= 1, got {self.max_evals}")
        if not 0 <= self.level <= 8:
            bad("level", f"must be in [0, 8], got {self.level}")
        if not 1 <= self.total_level <= 8:
            bad("total_level", f"must be in [1, 8], got {self.total_level}")
        for name in ("u_below", "u_above"):
            v = getattr(self, name)
            if v is not None and v < 0:
                bad(name, f"must be >= 0, got {v}")
        if self.init_nu <= 0:
            bad("init_nu", f"must be positive, got {self.init_nu}")
        for f in self.free:
            if f not in ("uc", "nu", "ye"):
                bad("free", f"unknown parameter {f!r} (choose from uc, nu, ye)")
        return self

    def hash(self):
        payload = json.dumps(
            {f.name: _jsonable(getattr(self, f.name)) for f in fields(self)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def _meta(cfg):
    return {
        "version": __version__,
        "config_hash": cfg.hash(),
        "entropy_base": {"blocks": "2", "single_site": cfg.single_base},
    }


def _header_lines(cfg, extra=()):
    lines = [
        f"trihub {cfg.subcommand} v{__version__}",
        f"config_hash: {cfg.hash()}",
        f"entropy_base: blocks=2 single={cfg.single_base}",
    ]
    lines.extend(extra)
    return lines


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract reserves 2 for
    # numerical failures and 1 for validation.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip() != "")


def _str_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip() != "")


def build_parser():
    parser = _Parser(prog="trihub", description=__doc__)
    parser.add_argument("--config", help="key=value file; explicit flags override it")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fixed-point", help="locate the unstable fixed point of u -> u'")
    p.add_argument("--bracket-lo", type=float)
    p.add_argument("--bracket-hi", type=float)
    p.add_argument("--bisect-tol", type=float)
    p.add_argument("--json", dest="as_json", action="store_true", default=None)
    p.add_argument("--output")

    p = sub.add_parser("scan", help="sweep u x levels and emit observable curves")
    p.add_argument("--u-min", type=float)
    p.add_argument("--u-max", type=float)
    p.add_argument("--u-count", type=int)
    p.add_argument("--levels", type=_int_list)
    p.add_argument("--observables", type=_str_list)
    p.add_argument("--single-base", choices=("e", "2"))
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--block-scan", dest="block_scan", action="store_true", default=None)
    p.add_argument("--no-block-scan", dest="block_scan", action="store_false", default=None)
    p.add_argument("--total-level", type=int)

    p = sub.add_parser("collapse", help="fit (u_c, nu, y_E) by data collapse of a curves CSV")
    p.add_argument("--curves", required=True)
    p.add_argument("--observable", choices=OBSERVABLES)
    p.add_argument("--init-uc", type=float)
    p.add_argument("--init-nu", type=float)
    p.add_argument("--init-ye", type=float)
    p.add_argument("--free", type=_str_list, help="comma list from uc,nu,ye (default uc,nu)")
    p.add_argument("--max-evals", type=int)
    p.add_argument("--output-dir")

    p = sub.add_parser("switch-report", help="entanglement contrast across the critical point")
    p.add_argument("--u-below", type=float)
    p.add_argument("--u-above", type=float)
    p.add_argument("--level", type=int)
    p.add_argument("--json", dest="as_json", action="store_true", default=None)
    p.add_argument("--output")

    p = sub.add_parser("geometry-dump", help="emit the block geometry as JSON")
    p.add_argument("--output")

    return parser


def _load_config_file(path):
    out = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                out[key.replace("-", "_")] = value
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from None
    return out


_CONVERTERS = {
    "levels": _int_list,
    "observables": _str_list,
    "free": _str_list,
    "as_json": lambda s: s.lower() in ("1", "true", "yes"),
    "block_scan": lambda s: s.lower() in ("1", "true", "yes"),
}


def make_config(args):
    cfg = RunConfig(subcommand=args.subcommand)
    file_values = _load_config_file(args.config) if args.config else {}
    valid = {f.name: f.type for f in fields(RunConfig)}
    for key, raw in file_values.items():
        if key not in valid:
            raise ConfigError(f"invalid value for '{key}': unknown configuration key")
        conv = _CONVERTERS.get(key)
        try:
            if conv is None:
                current = getattr(cfg, key)
                conv = type(current) if current is not None else float
                if conv is tuple:
                    conv = _str_list
            setattr(cfg, key, conv(raw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{key}': {exc}") from None
    for key, value in vars(args).items():
        if key in ("config", "subcommand") or value is None:
            continue
        setattr(cfg, key, value)
    return cfg.validate()


def cmd_fixed_point(cfg):
    u_star = find_fixed_point(cfg.bracket_lo, cfg.bracket_hi, tol=cfg.bisect_tol)
    slope = linearized_slope(u_star)
    nu = nu_from_linearization(u_star)
    report = {
        "u_star": u_star,
        "nu": nu,
        "slope": slope,
        "bracket": [cfg.bracket_lo, cfg.bracket_hi],
        "tol": cfg.bisect_tol,
        "meta": _meta(cfg),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    if cfg.as_json:
        print(text)
    else:
        print(f"u* = {u_star:.6f}")
        print(f"du'/du at u* = {slope:.6f}")
        print(f"nu = {nu:.6f}")
    return 0


def _report_csv_rows(reports, single_base):
    lines = []
    for r in reports:
        if isinstance(r, PointFailure):
            lines.append(
                f"{r.u0:.12g},{r.level},{7 ** (r.level + 1)},,,,,,{single_base},"
                f"error: {r.message}"
            )
        else:
            lines.append(
                f"{r.u0:.12g},{r.level},{r.N},{r.E_bb:.12g},{r.E_b7:.12g},"
                f"{r.E_avg:.12g},{r.E_single:.12g},{r.gap:.12g},{r.single_base},ok"
            )
    return lines


def cmd_scan(cfg):
    import os

    if cfg.u_min is None:
        u_star = find_fixed_point(cfg.bracket_lo, cfg.bracket_hi, tol=cfg.bisect_tol)
        grid = default_u_grid(u_star, cfg.u_count)
        grid_note = [f"grid: default, 0.2..1.8 x u* = {u_star:.9g}"]
    else:
        grid = np.linspace(cfg.u_min, cfg.u_max, cfg.u_count)
        grid_note = [f"grid: explicit [{cfg.u_min:.9g}, {cfg.u_max:.9g}]"]

    reports = scan_reports(
        grid, cfg.levels, single_base="e" if cfg.single_base == "e" else 2, workers=cfg.workers
    )
    failures = [r for r in reports if isinstance(r, PointFailure)]

    os.makedirs(cfg.output_dir, exist_ok=True)
    header = _header_lines(cfg, grid_note)

    report_path = os.path.join(cfg.output_dir, "report.csv")
    with open(report_path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("u0,level,N,E_bb,E_b7,E_avg,E_single,gap,base,status\n")
        for line in _report_csv_rows(reports, cfg.single_base):
            fh.write(line + "\n")

    ok = [r for r in reports if not isinstance(r, PointFailure)]
    for obs in cfg.observables:
        curves = []
        for lv in sorted(set(cfg.levels)):
            pts = [r for r in ok if r.level == lv]
            if not pts:
                continue
            curves.append(
                EntanglementCurve(
                    observable=obs,
                    N=7 ** (lv + 1),
                    us=np.array([r.u0 for r in pts]),
                    es=np.array([getattr(r, obs) for r in pts]),
                )
            )
        write_curves_csv(os.path.join(cfg.output_dir, f"curves_{obs}.csv"), curves, header)

    if cfg.block_scan:
        path = os.path.join(cfg.output_dir, "blocksize_scan.csv")
        with open(path, "w") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            fh.write("u,block_level,blocksize,E\n")
            for u in grid:
                try:
                    pairs = block_entanglement_vs_size(float(u), cfg.total_level)
                except NumericalError as exc:
                    fh.write(f"{u:.12g},,,error: {exc}\n")
                    continue
                for m, (size, e_val) in enumerate(pairs):
                    fh.write(f"{u:.12g},{m},{size},{e_val:.12g}\n")

    for f in failures:
        print(f"flagged: u={f.u0:.9g} level={f.level}: {f.message}", file=sys.stderr)
    print(f"scan complete: {len(ok)} points ok, {len(failures)} flagged -> {cfg.output_dir}")
    return 0


def cmd_collapse(cfg):
    import os

    try:
        curves = read_curves_csv(cfg.curves, cfg.observable)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"curves: {exc}") from None
    init_uc = cfg.init_uc
    if init_uc is None:
        init_uc = float(np.median(np.concatenate([c.us for c in curves])))
    fixed = tuple(name not in cfg.free for name in ("uc", "nu", "ye"))
    fit = fit_collapse(
        curves, (init_uc, cfg.init_nu, cfg.init_ye), fixed_mask=fixed, max_evals=cfg.max_evals
    )

    os.makedirs(cfg.output_dir, exist_ok=True)
    report = {
        "observable": cfg.observable,
        "u_c": fit.u_c,
        "nu": fit.nu,
        "y_E": fit.y_e,
        "residual": fit.residual,
        "evaluations": fit.evaluations,
        "converged": fit.converged,
        "fixed mask (u_c, nu, y_E)": list(fit.fixed_mask),
        "meta": _meta(cfg),
    }
    with open(os.path.join(cfg.output_dir, "collapse_fit.json"), "w") as fh:
        fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")

    master_path = os.path.join(cfg.output_dir, "master_curve.csv")
    with open(master_path, "w") as fh:
        for line in _header_lines(cfg, [f"u_c={fit.u_c:.9g} nu={fit.nu:.9g} y_E={fit.y_e:.9g}"]):
            fh.write(f"# {line}\n")
        fh.write("observable,N,x,y\n")
        for c in curves:
            q = c.us - fit.u_c
            x = q * float(c.N) ** (1.0 / (2.0 * fit.nu))
            y = c.es if fit.y_e == 0 else c.es / np.abs(q) ** fit.y_e
            for xi, yi in zip(x, y):
                fh.write(f"{c.observable},{c.N},{xi:.12g},{yi:.12g}\n")

    print(
        f"collapse fit: u_c = {fit.u_c:.6f}, nu = {fit.nu:.6f}, y_E = {fit.y_e:.6f}, "
        f"residual = {fit.residual:.3e}, converged = {fit.converged}"
    )
    return 0


def cmd_switch_report(cfg):
    u_below, u_above = cfg.u_below, cfg.u_above
    if u_below is None or u_above is None:
        u_star = find_fixed_point(cfg.bracket_lo, cfg.bracket_hi, tol=cfg.bisect_tol)
        u_below = u_star / 2 if u_below is None else u_below
        u_above = 2 * u_star if u_above is None else u_above
    e_on = central_block_entropy(u_below, cfg.level)
    e_off = central_block_entropy(u_above, cfg.level)
    width = transition_width(cfg.level)
    report = {
        "level": cfg.level,
        "u_below": u_below,
        "u_above": u_above,
        "E_bb_below": e_on,
        "E_bb_above": e_off,
        "contrast_bits": e_on - e_off,
        "transition_width": width,
        "meta": _meta(cfg),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    if cfg.as_json:
        print(text)
    else:
        print(f"E_bb(u = {u_below:.4f}) = {e_on:.4f} bits")
        print(f"E_bb(u = {u_above:.4f}) = {e_off:.4f} bits")
        print(f"contrast = {e_on - e_off:.4f} bits, width(level {cfg.level}) = {width:.6f}")
    return 0


def cmd_geometry_dump(cfg):
    payload = build_block_geometry().as_dict()
    payload["meta"] = _meta(cfg)
    text = json.dumps(payload, indent=2, sort_keys=True)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


_COMMANDS = {
    "fixed-point": cmd_fixed_point,
    "scan": cmd_scan,
    "collapse": cmd_collapse,
    "switch-report": cmd_switch_report,
    "geometry-dump": cmd_geometry_dump,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = make_config(args)
        return _COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
