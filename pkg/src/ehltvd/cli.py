"""Command-line driver.

::

    ehltvd run CONFIG            run one experiment from a config file
    ehltvd tables --case NAME    run a bundled case
    ehltvd lfa --eps E --kappa K --h H --samples N

Outputs go to the configured directory (``EHLTVD_OUTPUT_DIR`` overrides it).
Exit status: 0 ok, 2 configuration error, 3 divergence or non-physical state.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUTPUT_ENV, ConfigError, RunConfig, case_path, limiter_spec, load_config
from .grid import Field, convergence_order, make_hierarchy
from .report import config_hash, emit_field, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _meta(cfg: RunConfig, **extra):
    meta = {"config-hash": config_hash(cfg.text), "experiment": cfg.experiment,
            "case": cfg.name}
    meta.update(extra)
    return meta


def _write_history(path, cfg, histories, sizes):
    rows = []
    for n, hist in zip(sizes, histories):
        rows.extend((n, c, r) for c, r in enumerate(hist))
    return write_csv(path, ["n", "cycle", "residual"], rows, _meta(cfg))


def _write_times(path, cfg, times):
    rows = [(k, v) for k, v in sorted(times.items())]
    # wall times vary between runs; they live in their own file so the
    # result tables stay byte-identical
    return write_csv(path, ["stage", "seconds"], rows, _meta(cfg))


def run_linear(cfg: RunConfig, out: Path) -> int:
    from .linear_cd import CdProblem, SplittingKind, mg_solve

    g, p = cfg.grid, cfg.linear
    hier = make_hierarchy(g.get("bounds", (-1.0, 1.0)), g.get("coarsest", 9), g.get("levels", 6))
    problem = CdProblem(a=p.get("a", 1.0), eps=p.get("eps", 1e-6),
                        spec=limiter_spec(p), hierarchy=hier)
    kind = SplittingKind.parse(p.get("splitting", "Ls0"))
    rep = mg_solve(problem, kind, p.get("cycle", (2, 1, "V", 10)), p.get("tol", 1e-10),
                   p.get("fmg", True))
    rows = []
    for k, e in enumerate(rep.exact_norms):
        n = hier[k].nx - 1
        prev = rep.exact_norms[k - 1] if k else None
        order = [convergence_order(a, b) for a, b in zip(prev, e)] if prev else [None] * 3
        l1, l2, linf = e
        rows.append((f"{n}x{n}", linf, order[2], l1, order[0], l2, order[1]))
    meta = _meta(cfg, splitting=kind.value, limiter=str(problem.spec), eps=problem.eps)
    write_csv(out / f"{cfg.name}_errors.csv", ["N", "Linf", "p_inf", "L1", "p1", "L2", "p2"],
              rows, meta)
    _write_history(out / f"{cfg.name}_residuals.csv", cfg, rep.level_histories,
                   [lv.nx for lv in hier.levels[:len(rep.level_histories)]])
    _write_times(out / f"{cfg.name}_times.csv", cfg, rep.wall_times)
    if rep.extra.get("solution") is not None and not rep.diverged:
        lv = hier[len(rep.exact_norms) - 1]
        emit_field(Field(lv, rep.extra["solution"]), out / f"{cfg.name}_u.txt")
    if rep.diverged:
        print(f"diverged: {rep.message}", file=sys.stderr)
        return EXIT_DIVERGED
    for r in rows:
        print("  ".join(str(v) if isinstance(v, str) else ("--" if v is None else f"{v:.5e}")
                        for v in r))
    return EXIT_OK


def run_ehl(cfg: RunConfig, out: Path) -> int:
    from .ehl import EhlConfig, EhlDivergenceError, NonPhysicalStateError, solve_ehl

    e = cfg.ehl
    kw = {}
    for key in ("hybrid", "cycle", "tol", "c_h00", "omega_gs", "omega_jac", "mlmi_order",
                "mlmi_m", "switch_threshold"):
        if key in e:
            kw[key] = e[key]
    M, L = e["m"], e["l"]
    try:
        config = EhlConfig.for_case(M, L, finest_n=e.get("finest", 257),
                                    coarsest_n=e.get("coarsest"),
                                    half_width=e.get("half_width", 2.5),
                                    alpha=e.get("alpha", 1.7e-8),
                                    spec=limiter_spec(e, "vanleer"), **kw)
    except ValueError as exc:
        raise ConfigError(f"[ehl]: {exc}") from None
    try:
        state, rep = solve_ehl(config)
    except (EhlDivergenceError, NonPhysicalStateError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    moes = (1.5 * M) ** (2.0 / 3.0)
    rows = [(k + 1, n, hm, hm * moes, hc, hc * moes)
            for k, (n, (hm, hc)) in enumerate(zip(rep.level_sizes, rep.hm_hc))]
    meta = _meta(cfg, M=M, L=L, limiter=str(config.spec), hybrid=config.hybrid,
                 message=rep.message)
    write_csv(out / f"{cfg.name}_film.csv",
              ["level", "n", "H_m", "H_m_moes", "H_c", "H_c_moes"], rows, meta)
    norm_rows = []
    for k, nrm in enumerate(rep.norms):
        if nrm is None:
            continue
        o = rep.orders[k - 2] if k >= 2 else (None, None, None)
        norm_rows.append((rep.level_sizes[k], nrm[2], o[2], nrm[0], o[0], nrm[1], o[1]))
    write_csv(out / f"{cfg.name}_orders.csv", ["n", "Linf", "p_inf", "L1", "p1", "L2", "p2"],
              norm_rows, meta)
    _write_history(out / f"{cfg.name}_residuals.csv", cfg, rep.level_histories, rep.level_sizes)
    _write_times(out / f"{cfg.name}_times.csv", cfg, rep.wall_times)
    if e.get("dump_fields", True):
        emit_field(state.u, out / f"{cfg.name}_pressure.txt")
        emit_field(state.H, out / f"{cfg.name}_film.txt")
    for r in rows:
        print(f"level {r[0]} n={r[1]}  H_m {r[2]:.5e}  H_c {r[4]:.5e}")
    print(rep.message)
    return EXIT_OK


def run_lfa(cfg: RunConfig, out: Path) -> int:
    p = cfg.lfa
    return lfa_report(p.get("eps", 1e-6), p.get("kappa", 1.0 / 3.0), p.get("h", 1.0 / 64),
                      p.get("samples", 128), out, cfg.name, p.get("a", 1.0),
                      _meta(cfg))


def lfa_report(eps, kappa, h, samples, out: Path, name="lfa", a=1.0, meta=None) -> int:
    from .lfa import SPLITTINGS, on_high_boundary, smoothing_factor_kappa

    if not (eps > 0 and h > 0 and samples >= 4 and -1 <= kappa <= 1):
        raise ConfigError("lfa: need eps > 0, h > 0, samples >= 4 and kappa in [-1, 1]")
    alpha1, beta = eps / h ** 2, a / h
    meta = dict(meta or {})
    meta.update(eps=eps, kappa=kappa, h=h, samples=samples)
    rows = []
    for kind in SPLITTINGS:
        rep = smoothing_factor_kappa(alpha1, beta, kappa, samples, kind)
        t1, t2 = rep.argmax
        rows.append((kind, rep.mu, t1, t2, int(on_high_boundary(t1, t2, samples))))
        print(f"{kind}: mu = {rep.mu:.6f} at theta = ({t1:.4f}, {t2:.4f})")
        if kind == "Ls0":
            surf = [(x, y, abs(v)) for x, y, v in
                    zip(rep.theta1.ravel(), rep.theta2.ravel(), rep.values.ravel())]
            write_csv(out / f"{name}_surface_Ls0.csv", ["theta1", "theta2", "abs_symbol"],
                      surf, meta)
    write_csv(out / f"{name}_smoothing.csv",
              ["splitting", "mu", "theta1", "theta2", "on_high_boundary"], rows, meta)
    return EXIT_OK


RUNNERS = {"linear_cd": run_linear, "ehl": run_ehl, "lfa": run_lfa}


def run(config_path) -> int:
    """Execute the experiment described by ``config_path``; returns the exit status."""
    try:
        cfg = load_config(config_path)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        np.random.seed(cfg.seed)
        t = time.perf_counter()
        status = RUNNERS[cfg.experiment](cfg, out)
        print(f"{cfg.name}: wrote {out} in {time.perf_counter() - t:.1f} s")
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _parser():
    ap = argparse.ArgumentParser(prog="ehltvd", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("config")
    t = sub.add_parser("tables", help="run a bundled case")
    t.add_argument("--case", required=True)
    f = sub.add_parser("lfa", help="smoothing factors of the x-line kappa splittings")
    f.add_argument("--eps", type=float, default=1e-6)
    f.add_argument("--kappa", type=float, default=1.0 / 3.0)
    f.add_argument("--h", type=float, default=1.0 / 64)
    f.add_argument("--samples", type=int, default=128)
    f.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./out)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return run(args.config)
    if args.command == "tables":
        try:
            path = case_path(args.case)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return run(path)
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        key = f"lfa eps={args.eps!r} kappa={args.kappa!r} h={args.h!r} samples={args.samples}"
        return lfa_report(args.eps, args.kappa, args.h, args.samples, out,
                          meta={"config-hash": config_hash(key), "experiment": "lfa"})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
