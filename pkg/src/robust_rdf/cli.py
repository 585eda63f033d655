"""Command-line front end: ``robust-rdf {solve,sweep,bernoulli,check,pfr}``.

Configuration is a flat INI file read with :mod:`configparser`::

    [problem]
    nominal = 0.9, 0.1
    distortion = hamming          ; or rows: 0 1; 1 0

    [solve]
    s = 2.1972245773
    lambda = 1

    [grid]
    s = 0.5, 1, 1.5, 2, 2.5, 3    ; or linspace(0.5, 3, 6) / geomspace(0.2, 5, 8)
    lambda = geomspace(0.2, 5, 8)

    [run]
    seed = 0
    units = bits
    output_dir = out

Every section is optional except what the chosen subcommand needs.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracles, pfr, solver
from .prob import LN2, ProbabilityError, as_channel, as_distortion, as_pmf, hamming
from .rdf import NumericalRangeError, kernel_from_marginal

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

CSV_COLUMNS = ["s", "lambda", "D", "Gamma", "rate", "newton_iterations", "converged", "optimality_certified"]

log = logging.getLogger("robust_rdf")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    nominal: np.ndarray | None = None
    distortion: np.ndarray | None = None
    s: float | None = None
    lam: float | None = None
    s_grid: list = field(default_factory=list)
    lambda_grid: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    eps_newton: float = 1e-12
    eps_search: float = 1e-7
    seed: int = 0
    output_dir: Path = Path(".")
    units: str = "bits"
    workers: int = 1
    section: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.eps_newton <= 0 or self.eps_search <= 0:
            raise ConfigError("tolerances must be positive")
        if self.units not in ("bits", "nats"):
            raise ConfigError(f"units must be 'bits' or 'nats', got {self.units!r}")

    @property
    def scale(self) -> float:
        return 1.0 / LN2 if self.units == "bits" else 1.0


_RANGE = re.compile(r"^\s*(linspace|geomspace)\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)\s*$")


def parse_floats(text: str) -> list[float]:
    """``"0.1, 0.2"`` or ``linspace(a, b, n)`` / ``geomspace(a, b, n)``."""
    m = _RANGE.match(text)
    if m:
        fn = np.linspace if m.group(1) == "linspace" else np.geomspace
        return [float(v) for v in fn(float(m.group(2)), float(m.group(3)), int(m.group(4)))]
    try:
        return [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def parse_matrix(text: str) -> np.ndarray:
    """Row-major matrix; rows separated by ``;`` or newlines."""
    rows = [r for r in re.split(r"[;\n]", text) if r.strip()]
    mat = [parse_floats(r) for r in rows]
    if not mat or len({len(r) for r in mat}) != 1:
        raise ConfigError(f"ragged or empty matrix {text!r}")
    return np.array(mat, dtype=np.float64)


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path: str | None) -> tuple[RunConfig, configparser.ConfigParser]:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            cp.read(p, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    nominal = _get(cp, "problem", "nominal", parse_floats)
    try:
        nominal = as_pmf(nominal) if nominal is not None else None
    except ProbabilityError as exc:
        raise ConfigError(f"[problem] nominal: {exc}") from exc
    dist_raw = _get(cp, "problem", "distortion", str, "hamming")
    if dist_raw.strip().lower() == "hamming":
        distortion = hamming(len(nominal)) if nominal is not None else None
    else:
        try:
            distortion = as_distortion(parse_matrix(dist_raw))
        except ProbabilityError as exc:
            raise ConfigError(f"[problem] distortion: {exc}") from exc
    if nominal is not None and distortion is not None and distortion.shape[0] != len(nominal):
        raise ConfigError(f"distortion has {distortion.shape[0]} rows but nominal has {len(nominal)} symbols")
    targets = []
    for pair in (_get(cp, "targets", "pairs", str, "") or "").split(";"):
        if pair.strip():
            vals = parse_floats(pair)
            if len(vals) != 2:
                raise ConfigError(f"target {pair!r} must be 'D, Gamma'")
            targets.append(tuple(vals))
    cfg = RunConfig(
        nominal=nominal,
        distortion=distortion,
        s=_get(cp, "solve", "s", float),
        lam=_get(cp, "solve", "lambda", float),
        s_grid=_get(cp, "grid", "s", parse_floats, []),
        lambda_grid=_get(cp, "grid", "lambda", parse_floats, []),
        targets=targets,
        eps_newton=_get(cp, "tolerances", "eps_newton", float, 1e-12),
        eps_search=_get(cp, "tolerances", "eps_search", float, 1e-7),
        seed=_get(cp, "run", "seed", int, 0),
        output_dir=Path(_get(cp, "run", "output_dir", str, ".")),
        units=_get(cp, "run", "units", str, "bits"),
        workers=_get(cp, "run", "workers", int, 1),
    )
    return cfg, cp


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "s", None) is not None:
        cfg.s = args.s
    if getattr(args, "lam", None) is not None:
        cfg.lam = args.lam
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "units", None) is not None:
        cfg.units = args.units
    if getattr(args, "out", None) is not None:
        cfg.output_dir = Path(args.out)
    return cfg


def _require_problem(cfg: RunConfig):
    if cfg.nominal is None or cfg.distortion is None:
        raise ConfigError("[problem] nominal is required")


def _emit(obj, out: Path | None = None, name: str | None = None):
    text = json.dumps(obj, indent=2, sort_keys=False)
    print(text)
    if out is not None and name is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n", encoding="utf-8")


def cmd_solve(cfg: RunConfig, cp, args) -> int:
    _require_problem(cfg)
    if cfg.s is None or cfg.lam is None:
        raise ConfigError("solve needs s and lambda ([solve] section or --s/--lambda)")
    prob = solver.RobustProblem.make(cfg.nominal, cfg.distortion, cfg.s, cfg.lam)
    try:
        sol = solver.solve_point(prob, eps=cfg.eps_newton, seed=cfg.seed)
    except solver.OutOfDomainError as exc:
        _emit({"error": "out-of-domain", "message": str(exc)})
        return EXIT_SOLVER
    except NumericalRangeError as exc:
        _emit({"error": "numerical-range", "message": str(exc)})
        return EXIT_SOLVER
    rec = sol.to_record(cfg.units)
    _emit(rec, cfg.output_dir if args.out else None, "solution.json")
    if not sol.converged:
        return EXIT_SOLVER
    if sol.diagnostics.get("inconsistent"):
        return EXIT_INVARIANT
    return EXIT_OK


def sweep_rows(sols, scale: float) -> list[list]:
    rows = []
    for sol in sols:
        rows.append([
            repr(float(sol.params.s)), repr(float(sol.params.lam)), repr(float(sol.distortion_D)),
            repr(float(sol.radius_Gamma * scale)), repr(float(sol.rate * scale)),
            str(int(sol.newton_iterations)), str(bool(sol.converged)).lower(),
            str(bool(sol.optimality_certified)).lower(),
        ])
    return rows


def write_csv(path: Path, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_sweep(cfg: RunConfig, cp, args) -> int:
    _require_problem(cfg)
    if not cfg.s_grid or not cfg.lambda_grid:
        raise ConfigError("sweep needs nonempty [grid] s and lambda")
    sols = solver.sweep(cfg.nominal, cfg.distortion, cfg.s_grid, cfg.lambda_grid,
                        eps=cfg.eps_newton, seed=cfg.seed, workers=cfg.workers)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", sweep_rows(sols, cfg.scale))
    from .svgplot import scatter_svg

    svg = scatter_svg(
        [s.distortion_D for s in sols], [s.radius_Gamma * cfg.scale for s in sols],
        [s.rate * cfg.scale for s in sols],
        xlabel="D", ylabel=f"Gamma ({cfg.units})", clabel=f"rate ({cfg.units})",
        title="Robust RDF over achieved (D, Gamma)",
        hollow=[not s.optimality_certified for s in sols],
    )
    (out / "sweep.svg").write_text(svg, encoding="utf-8")
    n_conv = sum(s.converged for s in sols)
    n_cert = sum(s.optimality_certified for s in sols)
    summary = {"cells": len(sols), "converged": n_conv, "certified": n_cert,
               "csv": str(out / "sweep.csv"), "svg": str(out / "sweep.svg")}
    failed = [{"s": s.params.s, "lambda": s.params.lam, "message": s.diagnostics.get("message", "")}
              for s in sols if not s.optimality_certified]
    if failed:
        summary["flagged"] = failed
    _emit(summary)
    return EXIT_OK if n_conv >= 0.5 * len(sols) else EXIT_SOLVER


def cmd_bernoulli(cfg: RunConfig, cp, args) -> int:
    sec = "bernoulli"
    beta0 = args.beta0 if args.beta0 is not None else _get(cp, sec, "beta0", float)
    D = args.D if args.D is not None else _get(cp, sec, "D", float)
    Gamma = args.Gamma if args.Gamma is not None else _get(cp, sec, "Gamma", float)
    if beta0 is None and cfg.nominal is not None and len(cfg.nominal) == 2:
        beta0 = float(cfg.nominal[1])
    if None in (beta0, D, Gamma):
        raise ConfigError("bernoulli needs beta0, D and Gamma")
    try:
        pt = oracles.bernoulli_rrdf(beta0, D, Gamma)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(pt.to_record(), cfg.output_dir if args.out else None, "bernoulli.json")
    return EXIT_OK


def _perturb(Q: np.ndarray, eps: float) -> np.ndarray:
    # push mass toward the farthest reconstruction of each row
    worst = np.zeros_like(Q)
    worst[np.arange(Q.shape[0]), np.argmin(Q, axis=1)] = 1.0
    return (1 - eps) * Q + eps * worst


def cmd_check(cfg: RunConfig, cp, args) -> int:
    _require_problem(cfg)
    n_samples = _get(cp, "check", "samples", int, 200)
    perturb = _get(cp, "check", "perturb", float, 0.0)
    mi_tol = _get(cp, "check", "mi_tol", float, 1e-3)
    if cfg.s_grid and cfg.lambda_grid and cfg.s is None:
        sols = solver.sweep(cfg.nominal, cfg.distortion, cfg.s_grid, cfg.lambda_grid,
                            eps=cfg.eps_newton, seed=cfg.seed, workers=cfg.workers)
    elif cfg.s is not None and cfg.lam is not None:
        prob = solver.RobustProblem.make(cfg.nominal, cfg.distortion, cfg.s, cfg.lam)
        try:
            sols = [solver.solve_point(prob, eps=cfg.eps_newton, seed=cfg.seed)]
        except solver.OutOfDomainError as exc:
            _emit({"error": "out-of-domain", "message": str(exc)})
            return EXIT_SOLVER
    else:
        raise ConfigError("check needs a [solve] point or a [grid]")
    reports = []
    for i, sol in enumerate(sols):
        if not sol.optimality_certified:
            continue
        Q = _perturb(sol.Q_star, perturb) if perturb > 0 else None
        rep = oracles.saddle_check(sol, n_samples=n_samples, seed=cfg.seed + i, Q=Q, mi_tol=mi_tol)
        rec = rep.to_record()
        rec.update({"s": sol.params.s, "lambda": sol.params.lam, "feasible": rep.distortion_excess <= 1e-6})
        reports.append(rec)
    gaps = [r["gap"] for r in reports]
    summary = {
        "checked": len(reports),
        "skipped_uncertified": len(sols) - len(reports),
        "max_gap_nats": max(gaps) if gaps else None,
        "mean_gap_nats": float(np.mean(gaps)) if gaps else None,
        "violations": sum(not r["ok"] for r in reports),
        "perturb": perturb,
        "reports": reports,
    }
    _emit(summary, cfg.output_dir if args.out else None, "check.json")
    return EXIT_INVARIANT if summary["violations"] else EXIT_OK


def _pfr_channel(cfg: RunConfig, cp) -> np.ndarray:
    """``[pfr] channel``: explicit rows, or ``solve`` for the kernel of a solved point,
    or ``bsc(p)`` for a binary symmetric channel."""
    raw = _get(cp, "pfr", "channel", str, "solve").strip()
    m = re.match(r"^bsc\(\s*([^)]+)\)$", raw)
    if m:
        p = float(m.group(1))
        # exponential-family form of BSC(p): uniform marginal at slope ln((1-p)/p)
        return kernel_from_marginal([0.5, 0.5], math.log((1 - p) / p), hamming(2))
    if raw == "solve":
        _require_problem(cfg)
        if cfg.s is None or cfg.lam is None:
            raise ConfigError("[pfr] channel = solve needs s and lambda")
        sol = solver.solve_point(solver.RobustProblem.make(cfg.nominal, cfg.distortion, cfg.s, cfg.lam),
                                 eps=cfg.eps_newton, seed=cfg.seed)
        if not sol.optimality_certified:
            raise solver.SearchError("the solved point backing the channel is not certified")
        return sol.Q_star
    try:
        return as_channel(parse_matrix(raw))
    except ProbabilityError as exc:
        raise ConfigError(f"[pfr] channel: {exc}") from exc


def cmd_pfr(cfg: RunConfig, cp, args) -> int:
    sec = "pfr"
    mode = _get(cp, sec, "mode", str, "finite")
    trials = _get(cp, sec, "trials", int, 100_000)
    src = _get(cp, sec, "source_index", int, 0)
    rule = _get(cp, sec, "rule", str, "kl")
    workers = cfg.workers
    try:
        Q = _pfr_channel(cfg, cp)
    except (solver.SearchError, solver.OutOfDomainError) as exc:
        _emit({"error": "solver", "message": str(exc)})
        return EXIT_SOLVER
    delta = cfg.distortion if cfg.distortion is not None and cfg.distortion.shape == Q.shape else None
    try:
        if mode == "kl":
            mu0 = cfg.nominal if cfg.nominal is not None else None
            if mu0 is None:
                raise ConfigError("kl mode needs [problem] nominal")
            mu = as_pmf(_get(cp, sec, "mu", parse_floats) or mu0)
            Gamma = _get(cp, sec, "Gamma", float, 0.0)
            rep = pfr.estimate_rates_kl(mu0, Q, mu, Gamma, trials, cfg.seed, delta=delta, workers=workers)
        else:
            raw = _get(cp, sec, "sources", str)
            S = [as_pmf(parse_floats(r)) for r in raw.split(";") if r.strip()] if raw else None
            if not S:
                if cfg.nominal is None:
                    raise ConfigError("[pfr] sources or [problem] nominal required")
                S = [cfg.nominal]
            if mode == "block":
                N = _get(cp, sec, "N", int, 1)
                rep = pfr.simulate_block(S, Q, N, trials, cfg.seed, source_index=src, delta=delta,
                                         workers=workers, rule=rule)
            elif mode == "finite":
                rep = pfr.estimate_rates(S, Q, src, trials, cfg.seed, delta=delta, workers=workers, rule=rule)
            else:
                raise ConfigError(f"[pfr] mode must be finite, kl or block, got {mode!r}")
    except pfr.SupportError as exc:
        _emit({"error": "support", "message": str(exc)})
        return EXIT_INVARIANT
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    rec = rep.to_record()
    rec["constants"] = {"finite_set": pfr.C_FINITE, "kl_ball": pfr.C_KL}
    _emit(rec, cfg.output_dir if args.out else None, "pfr.json")
    return EXIT_OK if rep.passed else EXIT_INVARIANT


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "bernoulli": cmd_bernoulli,
    "check": cmd_check,
    "pfr": cmd_pfr,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robust-rdf", description="Robust rate-distortion over KL balls.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--s", type=float, help="distortion multiplier")
        p.add_argument("--lambda", dest="lam", type=float, help="KL multiplier")
        p.add_argument("--seed", type=int)
        p.add_argument("--units", choices=["bits", "nats"])
        p.add_argument("--out", help="output directory")
        if name == "bernoulli":
            p.add_argument("--beta0", type=float)
            p.add_argument("--D", type=float)
            p.add_argument("--Gamma", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, cp = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        cfg.__post_init__()
        return COMMANDS[args.command](cfg, cp, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
