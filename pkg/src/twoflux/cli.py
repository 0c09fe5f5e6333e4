"""Command-line front end: config parsing, file I/O, experiment drivers.

Configs are JSON objects.  Step functions use the ``StepFn.to_dict`` layout
``{"breakpoints": [...], "values": [...], "domain": [lo, hi] | null}``;
fluxes use ``{"kind": "quadratic", "a": .., "b": .., "c": ..}`` or
``{"kind": "tabulated", "samples": [[u, f], ...]}``.  CSV output carries a
header row and 17-significant-digit floats, so profiles reload losslessly
and identical config + seed reproduce outputs byte for byte.

Exit codes: 0 success, 2 configuration/validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import backward, control, godunov, hj, reachable
from .errors import (ConvergenceError, DomainError, InputError, SolveError,
                     StabilityError)
from .fluxes import ConvexFlux, FluxPair
from .stepfn import StepFn

_VALIDATION_ERRORS = (InputError, DomainError, KeyError, TypeError,
                      ValueError, OSError)


# ------------------------------------------------------------------ file I/O


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, columns: dict) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise InputError("CSV columns must have equal length")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(f"{a[i]:.17g}" for a in arrays) + "\n")


def read_csv(path) -> dict:
    """Inverse of :func:`write_csv`; 17 significant digits make the round
    trip exact."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(names):
        raise InputError(f"CSV has {data.shape[1]} columns, header names {len(names)}")
    return {n: data[:, i].copy() for i, n in enumerate(names)}


def _stepfn_from(obj, what: str) -> StepFn:
    try:
        return StepFn.from_dict(obj)
    except InputError as exc:
        raise InputError(f"{what}: {exc}") from exc


def _require(cfg: dict, key: str, what: str = "config"):
    if key not in cfg:
        raise InputError(f"{what} is missing required key {key!r}")
    return cfg[key]


def _pair_from(cfg: dict) -> FluxPair:
    fl = _require(cfg, "fluxes")
    return FluxPair(f=ConvexFlux.from_dict(_require(fl, "f", "fluxes")),
                    g=ConvexFlux.from_dict(_require(fl, "g", "fluxes")))


def _grid_from(cfg: dict) -> dict:
    grid = dict(x_min=-2.0, x_max=2.0, nx=401, nt=33)
    grid.update(cfg.get("grid", {}))
    if not grid["x_min"] < grid["x_max"]:
        raise InputError(f"grid needs x_min < x_max, got {grid}")
    if int(grid["nx"]) < 2 or int(grid["nt"]) < 1:
        raise InputError(f"grid needs nx >= 2 and nt >= 1, got {grid}")
    return grid


def _stepfn_or_none(sf) -> dict | None:
    return None if sf is None else sf.to_dict()


# ---------------------------------------------------------------- commands


def cmd_forward(cfg: dict, out: Path, *, base: Path, threads: int,
                seed: int) -> None:
    pair = _pair_from(cfg)
    T = float(_require(cfg, "T"))
    u0 = _stepfn_from(_require(cfg, "u0"), "u0")
    grid = _grid_from(cfg)
    xs = np.linspace(grid["x_min"], grid["x_max"], int(grid["nx"]))
    params = hj.SearchParams(threads=threads)
    sol = hj.solve_profile(pair, u0, T, xs=xs, params=params)
    t_grid = np.linspace(T / int(grid["nt"]), T, int(grid["nt"]))
    report = sol.check_interface(t_grid=t_grid)
    traces = sol.interface_traces(t_grid=t_grid)
    _, r1, l1 = sol.activity_curves(t_grid=t_grid)
    write_csv(out / "profile.csv", {"x": sol.x, "u": sol.u})
    write_json(out / "interface.json", {
        "seed": seed,
        "T": T,
        "dt": report.dt,
        "rh_tol": report.rh_tol,
        "rh_violation_measure": report.rh_violation_measure,
        "entropy_violation_measure": report.entropy_violation_measure,
        "R1": list(r1),
        "L1": list(l1),
        "traces": {
            "t": list(traces.t),
            "u_minus": list(traces.u_minus),
            "u_plus": list(traces.u_plus),
            "flux_minus": list(traces.flux_minus),
            "flux_plus": list(traces.flux_plus),
        },
    })


def cmd_oracle(cfg: dict, out: Path, *, base: Path, threads: int,
               seed: int) -> None:
    pair = _pair_from(cfg)
    T = float(_require(cfg, "T"))
    u0 = _stepfn_from(_require(cfg, "u0"), "u0")
    grid = _grid_from(cfg)
    dx = (grid["x_max"] - grid["x_min"]) / int(grid["nx"])
    prof = godunov.run(pair, u0, T, dx, window=(grid["x_min"], grid["x_max"]))
    write_csv(out / "profile.csv", {"x": prof.x, "u": prof.u})
    write_json(out / "run.json", {
        "seed": seed, "T": prof.t, "dx": prof.dx, "n_steps": prof.n_steps,
    })


def cmd_backward(cfg: dict, out: Path, *, base: Path, threads: int,
                 seed: int) -> None:
    pair = _pair_from(cfg)
    spec = _require(cfg, "backward")
    T = float(spec.get("T", cfg.get("T", 1.0)))
    rho = _stepfn_from(_require(spec, "rho", "backward"), "backward.rho")
    y_obj = spec.get("y", "identity")
    y = None if y_obj == "identity" else _stepfn_from(y_obj, "backward.y")
    if rho.domain is None:
        raise InputError("backward.rho must be an interval StepFn")
    side = "minus" if rho.domain[0] < 0.0 else "plus"
    build = backward.construct if side == "plus" else backward.construct_minus
    plan = build(pair, rho, y, T)
    nx = int(spec.get("nx", 601))
    err = plan.roundtrip_error(nx=nx, params=hj.SearchParams(threads=threads))
    lo, hi = sorted((0.0, plan.R))
    band = lo + (hi - lo) * (np.arange(257) + 0.5) / 257
    write_csv(out / "tmap.csv", {"x": band, "t": plan.tmap(band)})
    plan.u0.dump(out / "u0.json")
    write_json(out / "report.json", {
        "seed": seed,
        "side": plan.side,
        "R": plan.R,
        "T": plan.T,
        "l1_roundtrip": err,
        "tv_crossing": plan.tv_crossing,
        "tv_bound": plan.tv_bound,
        "warnings": plan.warnings,
    })


def cmd_optimize(cfg: dict, out: Path, *, base: Path, threads: int,
                 seed: int) -> None:
    pair = _pair_from(cfg)
    T = float(cfg.get("T", 1.0))
    tgt = _require(cfg, "target")
    k = _stepfn_from(_require(tgt, "k", "target"), "target.k")
    target = control.TargetSpec(pair, k, C=float(_require(tgt, "C", "target")))
    disc = control.DiscSpec(**cfg.get("disc", {}))
    res = control.minimize(target, T, disc, threads=threads, evaluate_J=True)
    R, rho, y = res.oriented()
    res.u0.dump(out / "u0.json")
    write_json(out / "result.json", {
        "seed": seed,
        "R": R,
        "rho": _stepfn_or_none(rho),
        "y": _stepfn_or_none(y),
        "side": res.side,
        "Jtilde": res.jtilde,
        "J": res.jcost,
        "warnings": res.warnings,
    })


def _reach_inputs(cfg: dict, base: Path):
    pair = _pair_from(cfg)
    sp = dict(_require(cfg, "spec"))
    if "T" not in sp and "T" in cfg:
        sp["T"] = cfg["T"]
    ext = sp.pop("exterior", None)
    if ext is not None:
        ext = _stepfn_from(ext, "spec.exterior")
    allowed = {"T", "C1", "C2", "B1", "B2", "delta", "R"}
    unknown = set(sp) - allowed
    if unknown:
        raise InputError(f"spec has unknown keys {sorted(unknown)}")
    spec = reachable.ReachSpec(exterior=ext, **sp)
    w_obj = _require(cfg, "W")
    if isinstance(w_obj, dict) and "csv" in w_obj:
        cols = read_csv(base / w_obj["csv"])
        if "x" not in cols or "W" not in cols:
            raise InputError("W dense CSV needs columns x,W")
        xs, ws = cols["x"], cols["W"]

        def W(x, _xs=xs, _ws=ws):
            return np.interp(np.asarray(x, dtype=float), _xs, _ws)
    else:
        sf = _stepfn_from(w_obj, "W")
        W = sf
    target = reachable.ReachTarget(W, side=cfg.get("side"))
    return pair, spec, target


def cmd_reach(cfg: dict, out: Path, *, base: Path, threads: int, seed: int,
              subcmd: str) -> None:
    pair, spec, target = _reach_inputs(cfg, base)
    grid = int(cfg.get("grid", {}).get("nx", 256)) if isinstance(
        cfg.get("grid"), dict) else int(cfg.get("grid", 256))
    if subcmd == "check":
        rep = reachable.membership(pair, target.W, spec, grid=grid,
                                   side=target.side, threads=threads)
        write_json(out / "report.json", {
            "seed": seed,
            "member": rep.member,
            "side": rep.side,
            "checks_passed": rep.checks_passed,
            "violation": rep.violation,
            "witness": None if not rep.member else {
                "R": rep.R,
                "rho": _stepfn_or_none(rep.rho),
                "y": _stepfn_or_none(rep.y),
            },
        })
        return
    res = reachable.exact_control(pair, target, spec, N=int(cfg.get("N", 64)),
                                  grid=grid, threads=threads)
    res.u0.dump(out / "u0.json")
    write_csv(out / "profile.csv", {"x": res.sol.x, "u": res.sol.u})
    write_json(out / "report.json", {
        "seed": seed,
        "member": True,
        "side": res.report.side,
        "l1_error": res.l1_error,
        "lam1": res.lam1,
        "lam2": res.lam2,
        "witness": {
            "R": res.report.R,
            "rho": _stepfn_or_none(res.report.rho),
            "y": _stepfn_or_none(res.report.y),
        },
        "warnings": res.warnings,
    })


# ---------------------------------------------------------------- dispatch


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twoflux",
        description="Conservation laws with a flux discontinuity at x = 0.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker-thread cap for module internals")
        sp.add_argument("--seed", type=int, default=None,
                        help="overrides the config seed")

    for name in ("forward", "oracle", "backward", "optimize"):
        common(sub.add_parser(name))
    reach = sub.add_parser("reach")
    reach.add_argument("subcmd", choices=("check", "control"))
    common(reach)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg_path = Path(args.config)
        with open(cfg_path) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
        seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
        if args.threads < 1:
            raise InputError(f"--threads must be >= 1, got {args.threads}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        kw = dict(out=out, base=cfg_path.parent, threads=args.threads,
                  seed=seed)
        if args.command == "reach":
            cmd_reach(cfg, subcmd=args.subcmd, **kw)
        else:
            {"forward": cmd_forward, "oracle": cmd_oracle,
             "backward": cmd_backward, "optimize": cmd_optimize,
             }[args.command](cfg, **kw)
    except json.JSONDecodeError as exc:
        print(f"twoflux: malformed config JSON: {exc}", file=sys.stderr)
        return 2
    except _VALIDATION_ERRORS as exc:
        print(f"twoflux: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, SolveError, StabilityError) as exc:
        print(f"twoflux: solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
