"""Command-line front end: solve, classify, verify, sweep, oracle.

All outputs are deterministic for a fixed configuration and seed: JSON is
written with sorted keys and no timestamps, sweep rows are merged in
submission order regardless of worker scheduling, and binary field
containers depend only on the computed samples.  Exit codes: 0 for a
successful (converged, unflagged) run, 2 when the regime machinery flags the
run (divergence witness, energy floor, or an endpoint contradiction), 1 for
errors and failed verification.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import __version__
from .functionals import ProblemParams
from .grid import GridSpec, write_field, write_field_csv
from .regimes import classify_exponent, critical_exponents, mu_star_equivalence, mu_star_l2critical
from .solver import SolverOptions, solve_ground_state
from .verify import estimate_gn_constant, full_suite

__all__ = ["main", "SWEEP_COLUMNS"]

SWEEP_COLUMNS = [
    "n", "alpha", "s", "p", "lambda", "mu", "tau", "N", "L",
    "converged", "iters", "H", "grad", "semi", "A", "S", "I",
    "Lambda", "delta", "nehari_rel", "pohozaev_rel", "energy_gap_rel", "regime",
]

_PARAM_KEYS = ("n", "alpha", "s", "p", "lambda", "mu", "tau")
_SOLVER_KEYS = (
    "dt", "max_iters", "tol_energy", "tol_residual", "c", "seed_width",
    "riesz_method", "divergence_floor", "max_dt_halvings", "use_dealias",
    "history_every", "residual_every",
)


def _parse_number(x):
    """Accept ints, floats, and exact-rational strings like ``7/3``."""
    if isinstance(x, bool):
        raise ValueError(f"expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return x
    if isinstance(x, str):
        s = x.strip()
        if "/" in s:
            return Fraction(s)
        try:
            return int(s)
        except ValueError:
            return float(s)
    raise ValueError(f"cannot interpret {x!r} as a number")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("configuration must be a JSON object")
    return cfg


def _apply_overrides(cfg: dict, sets: list[str]) -> dict:
    params = dict(cfg.get("params", {}))
    for item in sets or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key in _PARAM_KEYS:
            params[key] = value
        elif key in _SOLVER_KEYS:
            solver = dict(cfg.get("solver", {}))
            solver[key] = json.loads(value) if value in ("true", "false") else value
            cfg = {**cfg, "solver": solver}
        else:
            raise ValueError(f"unknown --set key {key!r}")
    return {**cfg, "params": params}


def _build_params(cfg: dict) -> ProblemParams:
    raw = cfg.get("params", {})
    missing = [k for k in _PARAM_KEYS if k not in raw and not (k == "lambda" and "lam" in raw)]
    if missing:
        raise ValueError(f"missing parameters: {', '.join(missing)}")
    lam = raw.get("lambda", raw.get("lam"))
    return ProblemParams(
        n=int(_parse_number(raw["n"])),
        alpha=_parse_number(raw["alpha"]),
        s=_parse_number(raw["s"]),
        p=_parse_number(raw["p"]),
        lam=float(_parse_number(lam)),
        mu=float(_parse_number(raw["mu"])),
        tau=float(_parse_number(raw["tau"])),
    )


def _build_grid(cfg: dict, n: int, grid_flag: str | None) -> GridSpec:
    raw = dict(cfg.get("grid", {}))
    if grid_flag:
        try:
            N_str, L_str = grid_flag.split(",")
            raw = {"N": int(N_str), "L": float(L_str)}
        except ValueError as exc:
            raise ValueError("--grid expects N,L (e.g. 32,16.0)") from exc
    if "N" not in raw or "L" not in raw:
        raise ValueError("grid requires both N and L")
    return GridSpec(n=n, N=int(raw["N"]), L=float(raw["L"]))


def _build_options(cfg: dict, resolution_study: bool) -> SolverOptions:
    raw = dict(cfg.get("solver", {}))
    kwargs = {}
    for key in _SOLVER_KEYS:
        if key in raw:
            value = raw[key]
            if isinstance(value, str):
                value = _parse_number(value) if key != "riesz_method" else value
            kwargs[key] = value
    ints = ("max_iters", "max_dt_halvings", "history_every", "residual_every")
    for key in ints:
        if key in kwargs:
            kwargs[key] = int(kwargs[key])
    for key in ("dt", "tol_energy", "tol_residual", "c", "seed_width", "divergence_floor"):
        if key in kwargs:
            kwargs[key] = float(kwargs[key])
    if resolution_study:
        kwargs["resolution_study"] = True
    return SolverOptions(**kwargs)


def _echo(params: ProblemParams, grid: GridSpec | None, opts: SolverOptions | None,
          seed: int) -> dict:
    echo = {"params": params.as_dict(), "seed": seed, "version": __version__}
    if isinstance(params.p, Fraction):
        echo["p_exact"] = str(params.p)
    if grid is not None:
        echo["grid"] = {"n": grid.n, "N": grid.N, "L": grid.L}
    if opts is not None:
        echo["solver"] = opts.as_dict()
    return echo


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sweep_row(report) -> list:
    bd = report.breakdown
    p = report.params
    return [
        p.n, float(p.alpha), float(p.s), float(p.p), p.lam, p.mu, p.tau,
        report.grid.N, report.grid.L,
        report.converged, report.iterations,
        bd.H, bd.grad, bd.semi, bd.A, bd.S, bd.I,
        report.multiplier, report.delta,
        report.nehari_rel, report.pohozaev_rel, report.energy_gap_rel,
        report.regime,
    ]


def _solve_exit(report) -> int:
    if report.regime_flag is not None:
        return 2
    return 0 if report.converged else 1


def cmd_solve(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set)
    params = _build_params(cfg)
    grid = _build_grid(cfg, params.n, args.grid)
    opts = _build_options(cfg, args.resolution_study)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))

    u, report = solve_ground_state(params, grid, opts)

    if args.out:
        out = Path(args.out)
        payload = {
            "command": "solve",
            "config": _echo(params, grid, opts, seed),
            "report": report.as_dict(),
        }
        _write_json(payload, out / "report.json")
        write_field(u, out / "state.bin")
        if args.csv:
            write_field_csv(u, out / "state.csv")
        with open(out / "history.csv", "w") as fh:
            fh.write("iteration,I,eq_rel\n")
            for it, I, rel in report.history:
                rel_txt = "" if (isinstance(rel, float) and math.isnan(rel)) else repr(rel)
                fh.write(f"{it},{I!r},{rel_txt}\n")

    flag = report.regime_flag or "-"
    print(
        f"converged={report.converged} iterations={report.iterations} "
        f"I={report.breakdown.I:.10e} Lambda={report.multiplier:.10e} "
        f"nehari_rel={report.nehari_rel:.3e} pohozaev_rel={report.pohozaev_rel:.3e} "
        f"regime={report.regime} flag={flag}"
    )
    if report.contradiction is not None:
        c = report.contradiction
        print(
            f"contradiction: {c.lhs_name}={c.lhs:.6e} vs {c.rhs_name}={c.rhs:.6e} "
            f"opposite_signs={c.opposite_signs}"
        )
    return _solve_exit(report)


def cmd_classify(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set)
    raw = cfg.get("params", {})
    needed = [k for k in ("n", "alpha", "s", "p") if k not in raw]
    if needed:
        raise ValueError(f"classify requires parameters: {', '.join(needed)}")
    n = int(_parse_number(raw["n"]))
    alpha = _parse_number(raw["alpha"])
    s = _parse_number(raw["s"])
    p = _parse_number(raw["p"])
    tau = float(_parse_number(raw.get("tau", 1.0)))

    exponents = critical_exponents(n, alpha, s)
    label = classify_exponent(n, alpha, s, p)

    gn = cfg.get("gn_constant")
    if gn is None:
        # default interpolation constant, estimated at the upper end of the
        # guarded exponent range (the mixed-mass exponent for this s)
        gn = estimate_gn_constant(n, float(alpha), float(exponents.s_upper))
    thresholds = {
        "gn_constant": float(gn),
        "mu_star_l2critical": mu_star_l2critical(n, float(alpha), tau, float(gn)),
    }
    try:
        thresholds["mu_star_equivalence"] = mu_star_equivalence(
            n, float(alpha), float(p), tau, float(gn)
        )
    except ValueError:
        thresholds["mu_star_equivalence"] = None

    payload = {
        "command": "classify",
        "version": __version__,
        "params": {"n": n, "alpha": float(alpha), "s": float(s), "p": float(p), "tau": tau},
        "exponents": exponents.as_dict(),
        "label": label.value,
        "thresholds": thresholds,
    }
    if isinstance(p, Fraction):
        payload["params"]["p_exact"] = str(p)
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        _write_json(payload, Path(args.out) / "classify.json")
    return 0


def _verify_like(args, quick: bool) -> int:
    seed = args.seed if args.seed is not None else 20240817
    report = full_suite(quick=quick, corrupt=getattr(args, "corrupt_tables", False), seed=seed)
    for check in report["checks"]:
        status = "ok " if check["passed"] else "FAIL"
        print(f"{status} {check['name']}: value={check['value']:.6e} bound={check['bound']:.1e}")
    print(f"suite passed: {report['passed']}")
    if args.out:
        _write_json({"command": "verify", "version": __version__, "report": report},
                    Path(args.out) / "verify.json")
    return 0 if report["passed"] else 1


def cmd_verify(args) -> int:
    return _verify_like(args, quick=args.quick)


def cmd_oracle(args) -> int:
    # oracle mode: the fast closed-form and tiny-grid comparisons only
    return _verify_like(args, quick=True)


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set)
    axes_raw = cfg.get("sweep")
    if not axes_raw:
        raise ValueError("sweep requires a 'sweep' table of axis lists in the config")
    axis_names = list(axes_raw.keys())
    for name in axis_names:
        if name not in _PARAM_KEYS + ("N", "L"):
            raise ValueError(f"unknown sweep axis {name!r}")
    axis_values = [list(axes_raw[name]) for name in axis_names]
    combos = list(itertools.product(*axis_values))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    opts = _build_options(cfg, args.resolution_study)

    def run_one(combo):
        local = {**cfg, "params": dict(cfg.get("params", {}))}
        grid_raw = dict(cfg.get("grid", {}))
        for name, value in zip(axis_names, combo):
            if name in ("N", "L"):
                grid_raw[name] = value
            else:
                local["params"][name] = value
        params = _build_params(local)
        grid = _build_grid({"grid": grid_raw}, params.n, args.grid)
        return solve_ground_state(params, grid, opts)

    results: list = [None] * len(combos)
    errors: list[tuple[int, str]] = []
    workers = max(1, args.workers)
    if workers == 1:
        iterator = map(run_one, combos)
        for idx, res in enumerate(iterator):
            results[idx] = res
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_one, combo) for combo in combos]
            for idx, fut in enumerate(futures):
                try:
                    results[idx] = fut.result()
                except Exception as exc:  # recorded per-row, sweep continues
                    errors.append((idx, str(exc)))

    out = Path(args.out) if args.out else None
    rows = []
    for idx, combo in enumerate(combos):
        tag = f"r{idx:04d}"
        if results[idx] is None:
            err = next(msg for i, msg in errors if i == idx)
            print(f"{tag}: ERROR {err}")
            if out:
                _write_json({"command": "sweep-row", "row": tag, "error": err},
                            out / "rows" / f"{tag}.json")
            continue
        u, report = results[idx]
        rows.append(_sweep_row(report))
        flag = report.regime_flag or "-"
        print(
            f"{tag}: converged={report.converged} iterations={report.iterations} "
            f"I={report.breakdown.I:.6e} regime={report.regime} flag={flag}"
        )
        if out:
            payload = {
                "command": "sweep-row",
                "row": tag,
                "config": _echo(report.params, report.grid, opts, seed),
                "report": report.as_dict(),
            }
            _write_json(payload, out / "rows" / f"{tag}.json")
            write_field(u, out / "rows" / f"{tag}.bin")
    if out:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w") as fh:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_csv_cell(v) for v in row) + "\n")
    return 1 if errors else 0


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON configuration file")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="seed recorded in reports")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a parameter or solver option")
    sub.add_argument("--grid", default=None, metavar="N,L", help="grid override")
    sub.add_argument("--workers", type=int, default=1, help="sweep worker threads")
    sub.add_argument("--resolution-study", action="store_true",
                     help="re-solve on the halved grid and report drift")
    sub.add_argument("--csv", action="store_true", help="also write fields as CSV")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="choqflow",
        description="Pseudospectral ground states of mixed local/nonlocal "
        "Choquard-type constrained minimization problems.",
    )
    parser.add_argument("--version", action="version", version=f"choqflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run the normalized gradient flow")
    _add_common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("classify", help="regime label and thresholds for the exponents")
    _add_common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("verify", help="run the self-check suite")
    _add_common(sp)
    sp.add_argument("--quick", action="store_true", help="skip the heavy ratio blocks")
    sp.add_argument("--corrupt-tables", action="store_true",
                    help="inject a table fault; the suite must fail")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="grid of solves with a merged CSV")
    _add_common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="fast closed-form and tiny-grid oracles")
    _add_common(sp)
    sp.set_defaults(func=cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
