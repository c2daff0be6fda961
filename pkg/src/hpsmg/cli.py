"""Command-line driver: single runs and parameter sweeps.

Examples::

    hpsmg --mode direct
    hpsmg --mode mg --levels 4 --gamma 1 --coarse-iters 5
    hpsmg --sweep "levels=2-8;gamma=1;ci=4,5,6" --report sweep.csv
"""

import argparse
import csv
from dataclasses import asdict, dataclass, fields, replace
import itertools
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .dissection import build_hierarchy, direct_solve
from .krylov import KrylovConfig, SolveReport, fgmres, gmres
from .multigrid import MGConfig, MGPreconditioner
from .problems import PROBLEMS, discretize, dump_field, recover_solution, wavenumber_from_ppw

log = logging.getLogger("hpsmg")

REPORT_SCHEMA = "hpsmg-report"
REPORT_VERSION = 1
CSV_COLUMNS = ["levels", "gamma", "coarse_iters", "pmem_bytes", "build_s", "iters",
               "solve_s", "final_residual"]
MODES = ("direct", "mg", "unpreconditioned", "exact-coarse")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "bump"
    n: int = 16
    N: int = 8
    ppw: float = None
    kappa: float = None
    mode: str = "mg"
    depth: int = None
    gamma: int = None
    coarse_iters: int = None
    tol: float = 1e-8
    restart: int = 60
    max_iters: int = 10000
    report: str = None
    dump_field: str = None

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.ppw is not None and self.kappa is not None:
            raise ConfigError("give either ppw or kappa, not both")
        if self.ppw is None and self.kappa is None:
            self.ppw = 9.6
        if self.ppw is not None and not self.ppw > 2:
            raise ConfigError(f"ppw must exceed 2, got {self.ppw}")
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if self.n < 2 or self.n & (self.n - 1):
            raise ConfigError(f"elements per side must be a power of two >= 2, got {self.n}")
        if self.N < 2:
            raise ConfigError(f"degree must be >= 2, got {self.N}")
        if not 0 < self.tol < 1 or self.restart < 1 or self.max_iters < 1:
            raise ConfigError("need 0 < tol < 1, restart >= 1 and max_iters >= 1")
        L = 2 * (self.n.bit_length() - 1)
        if self.mode == "mg":
            self.depth = 2 if self.depth is None else self.depth
            self.gamma = 1 if self.gamma is None else self.gamma
            self.coarse_iters = 4 if self.coarse_iters is None else self.coarse_iters
            if self.gamma < 1 or self.coarse_iters < 1:
                raise ConfigError("gamma and coarse-iters must be >= 1")
        else:
            if self.gamma is not None or self.coarse_iters is not None:
                raise ConfigError(f"--gamma/--coarse-iters only apply to mode 'mg', not {self.mode!r}")
            if self.mode == "exact-coarse":
                self.depth = L if self.depth is None else self.depth
            elif self.depth is not None:
                raise ConfigError(f"--levels does not apply to mode {self.mode!r}")
        if self.depth is not None and not 2 <= self.depth <= L:
            raise ConfigError(f"levels must lie in 2..{L} for {self.n}x{self.n} elements")
        return self

    @property
    def wavenumber(self):
        if self.kappa is not None:
            return float(self.kappa)
        return wavenumber_from_ppw(self.ppw, self.n, self.N)


def _row(config, report):
    return {
        "mode": config.mode,
        "levels": config.depth if config.depth is not None else 0,
        "gamma": config.gamma if config.gamma is not None else 0,
        "coarse_iters": config.coarse_iters if config.coarse_iters is not None else 0,
        "pmem_bytes": int(report.precond_memory),
        "build_s": round(report.wall_build, 6),
        "iters": int(report.iterations),
        "solve_s": round(report.wall_solve, 6),
        "final_residual": float(report.final_residual),
        "converged": bool(report.converged),
    }


def run_experiment(config, system=None, hierarchy=None, want_field=None):
    """Run one configuration; returns ``(SolveReport, row dict, field or None)``.

    ``system`` and ``hierarchy`` may be passed in to share work across a
    sweep; the hierarchy build is then not re-timed.
    """
    config.validate()
    if system is None:
        spec = PROBLEMS[config.problem](config.wavenumber)
        system = discretize(spec, config.n, config.N)
    M, rhs = system.matrix, system.rhs
    kcfg = KrylovConfig(restart=config.restart, tol=config.tol, max_iters=config.max_iters)
    build_s = 0.0
    if config.mode == "unpreconditioned":
        t0 = time.perf_counter()
        g, report = gmres(M, rhs, kcfg)
        report.wall_solve = time.perf_counter() - t0
    elif config.mode == "direct":
        t0 = time.perf_counter()
        hier = hierarchy if hierarchy is not None and hierarchy.complete else build_hierarchy(system)
        build_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        g = direct_solve(hier, rhs)
        report = SolveReport(iterations=0, converged=True)
        report.wall_solve = time.perf_counter() - t0
        report.final_residual = float(np.linalg.norm(M @ g - rhs) / np.linalg.norm(rhs))
        report.precond_memory = hier.memory_bytes(exact=True)
    else:
        exact = config.mode == "exact-coarse"
        mg = MGConfig(depth=config.depth, gamma=config.gamma or 1,
                      coarse_iters=config.coarse_iters or 1, exact=exact)
        t0 = time.perf_counter()
        if hierarchy is not None and len(hierarchy.levels) >= config.depth - 1 and (
                hierarchy.complete or not exact):
            hier = hierarchy
        elif exact:
            hier = build_hierarchy(system)
        else:
            hier = build_hierarchy(system, upto=config.depth - 1, factor_coarse=False)
        pre = MGPreconditioner(hier, mg)
        build_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        g, report = fgmres(M, rhs, pre, kcfg)
        report.wall_solve = time.perf_counter() - t0
        report.precond_memory = pre.memory_bytes
    report.wall_build = build_s
    field = None
    if want_field or (want_field is None and config.dump_field):
        field = recover_solution(system, g)
        if config.dump_field:
            dump_field(field, config.dump_field)
    return report, _row(config, report), field


def parse_sweep(text):
    """Parse ``"levels=2-8;gamma=1,2;ci=4,5,6"`` into value lists."""
    axes = {"levels": [2], "gamma": [1], "ci": [4]}
    if not text.strip():
        raise ConfigError("empty sweep specification")
    for part in text.split(";"):
        if not part.strip():
            continue
        key, _, vals = part.partition("=")
        key = key.strip().replace("coarse_iters", "ci").replace("coarse-iters", "ci")
        if key not in axes or not vals.strip():
            raise ConfigError(f"bad sweep axis {part!r}")
        out = []
        for tok in vals.split(","):
            tok = tok.strip()
            if "-" in tok:
                lo, hi = (int(v) for v in tok.split("-"))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(tok))
        if not out:
            raise ConfigError(f"sweep axis {key!r} is empty")
        axes[key] = out
    return axes["levels"], axes["gamma"], axes["ci"]


def run_sweep(base, depths, gammas, cis, baselines=False):
    """One multigrid run per (depth, gamma, coarse_iters); failures are recorded, not raised.

    The hierarchy for each depth is built once and its build time is
    reported on every row of that depth.
    """
    if not depths or not gammas or not cis:
        raise ConfigError("sweep axes must be non-empty")
    base = replace(base, mode="mg", depth=None, gamma=None, coarse_iters=None,
                   dump_field=None).validate()
    spec = PROBLEMS[base.problem](base.wavenumber)
    system = discretize(spec, base.n, base.N)
    rows = []
    for depth in depths:
        t0 = time.perf_counter()
        hier = None
        try:
            hier = build_hierarchy(system, upto=depth - 1, factor_coarse=False)
        except Exception as exc:  # recorded per cell below
            log.error("hierarchy for depth %d failed: %s", depth, exc)
        build_s = time.perf_counter() - t0
        for gamma, ci in itertools.product(gammas, cis):
            cfg = replace(base, depth=depth, gamma=gamma, coarse_iters=ci)
            try:
                if hier is None:
                    raise RuntimeError("no hierarchy")
                report, row, _ = run_experiment(cfg, system, hier, want_field=False)
                row["build_s"] = round(build_s, 6)
            except Exception as exc:
                log.error("cell depth=%d gamma=%d ci=%d failed: %s", depth, gamma, ci, exc)
                row = _row(cfg, SolveReport())
                row["error"] = str(exc)
            log.info("depth %d gamma %d ci %d: %d iterations", depth, gamma, ci, row["iters"])
            rows.append(row)
    extra = {}
    if baselines:
        for mode in ("unpreconditioned", "exact-coarse"):
            cfg = replace(base, mode=mode, depth=None, gamma=None, coarse_iters=None)
            _, row, _ = run_experiment(cfg, system, want_field=False)
            extra[mode] = row
    return rows, extra


def format_table(rows):
    """Plain-text layout: one line per depth, one (It, St) pair per (gamma, c.i.) column."""
    cols = sorted({(r["gamma"], r["coarse_iters"]) for r in rows})
    depths = sorted({r["levels"] for r in rows})
    by = {(r["levels"], r["gamma"], r["coarse_iters"]): r for r in rows}
    head = f"{'levels':>6} {'PMem[MB]':>9} {'Bt[s]':>7} " + " ".join(
        f"{f'g={g} ci={c}':>16}" for g, c in cols)
    lines = [head]
    for d in depths:
        first = next(r for r in rows if r["levels"] == d)
        cells = []
        for g, c in cols:
            r = by.get((d, g, c))
            if r is None:
                cells.append(f"{'':>16}")
            else:
                it = f"{r['iters']}" + ("" if r["converged"] else "*")
                cells.append(f"{it:>7} {r['solve_s']:>8.2f}")
        lines.append(f"{d:>6} {first['pmem_bytes'] / 2**20:>9.1f} {first['build_s']:>7.2f} "
                     + " ".join(cells))
    return "\n".join(lines)


def write_report(path, config, rows, baselines=None):
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            with open(path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
                w.writeheader()
                w.writerows(rows)
        else:
            doc = {
                "schema": REPORT_SCHEMA,
                "version": REPORT_VERSION,
                "config": {f.name: getattr(config, f.name) for f in fields(config)},
                "rows": rows,
                "baselines": baselines or {},
            }
            path.write_text(json.dumps(doc, indent=2))
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc


def build_parser():
    p = argparse.ArgumentParser(
        prog="hpsmg",
        description="HPS nested-dissection / multigrid solver for 2D Helmholtz problems.",
    )
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="bump")
    p.add_argument("--elements", type=int, default=16, help="elements per side (power of two)")
    p.add_argument("--degree", type=int, default=8, help="polynomial degree per element")
    k = p.add_mutually_exclusive_group()
    k.add_argument("--ppw", type=float, help="points per wavelength (default 9.6)")
    k.add_argument("--kappa", type=float, help="wavenumber")
    p.add_argument("--mode", choices=MODES, default="mg")
    p.add_argument("--levels", type=int, help="multigrid depth (number of levels used)")
    p.add_argument("--gamma", type=int, help="coarse calls per level")
    p.add_argument("--coarse-iters", type=int, help="GMRES steps of the coarse solve")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--restart", type=int, default=60)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--report", help="write a report (.json or .csv)")
    p.add_argument("--dump-field", help="write the solution field (.csv or .npz)")
    p.add_argument("--sweep", help='sweep spec, e.g. "levels=2-8;gamma=1;ci=4,5,6"')
    p.add_argument("--baselines", action="store_true",
                   help="with --sweep, also run unpreconditioned and exact-coarse")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = RunConfig(
        problem=args.problem, n=args.elements, N=args.degree, ppw=args.ppw, kappa=args.kappa,
        mode=args.mode, depth=args.levels, gamma=args.gamma, coarse_iters=args.coarse_iters,
        tol=args.tol, restart=args.restart, max_iters=args.max_iters, report=args.report,
        dump_field=args.dump_field,
    )
    try:
        if args.sweep:
            if args.mode != "mg" or args.levels or args.gamma or args.coarse_iters:
                raise ConfigError("--sweep replaces --mode/--levels/--gamma/--coarse-iters")
            if args.dump_field:
                raise ConfigError("--dump-field is not available with --sweep")
            depths, gammas, cis = parse_sweep(args.sweep)
            config.validate()
            rows, extra = run_sweep(config, depths, gammas, cis, baselines=args.baselines)
            print(f"kappa = {config.wavenumber:.4f}")
            for name, row in extra.items():
                print(f"{name}: iters {row['iters']}, PMem {row['pmem_bytes'] / 2**20:.1f} MB, "
                      f"Bt {row['build_s']:.2f} s, St {row['solve_s']:.2f} s")
            print(format_table(rows))
            if args.report:
                write_report(args.report, config, rows, extra)
            ok = all(r["converged"] for r in rows) and all(r["converged"] for r in extra.values())
            return 0 if ok else 1
        config.validate()
        report, row, _ = run_experiment(config)
    except ConfigError as exc:
        print(f"hpsmg: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(row))
    if args.report:
        write_report(args.report, config, [row])
    return 0 if report.converged else 1


if __name__ == "__main__":
    sys.exit(main())
