"""Command-line experiment runner.

    degcascade <command> --config FILE --out DIR [--seed N] [--strict] [--threads N]

Exit codes: 0 success, 2 configuration error, 3 failed check under --strict.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .adjoint import TerminalData, characteristic_eval, solve_adjoint, transpose_check
from .coefficients import check_carleman_hypotheses, check_pair_ordering, classify_degeneracy
from .config import ConfigError, ExperimentConfig
from .forward import CascadeState, gronwall_check, solve_forward
from .hum import HumProblem, null_control_full, synthesize_control
from .inequalities import (VARIANTS, adjoint_forcing, carleman_constant_sweep, carleman_sides,
                           observability_sides)
from .mesh import field_to_csv
from .presets import random_band_limited

CSV_SCHEMA_VERSION = 1
COMMANDS = ("classify", "simulate", "adjoint", "carleman", "observability", "hum", "sweep")


class StrictFailure(RuntimeError):
    pass


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class Run:
    """Output directory bookkeeping and the manifest."""

    def __init__(self, command, cfg: ExperimentConfig, out: Path, seed: int, strict: bool, threads: int):
        self.command, self.cfg, self.out = command, cfg, out
        self.seed, self.strict, self.threads = seed, strict, threads
        self.files = []
        self.checks = {}
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for row in rows:
                wr.writerow([_fmt(v) for v in row])

    def check(self, name, ok):
        self.checks[name] = bool(ok)

    def finish(self):
        files = {}
        for name in sorted(set(self.files)):
            files[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()
        manifest = {
            "command": self.command, "config_sha256": self.cfg.sha256, "config": self.cfg.data,
            "seed": self.seed, "grid": self.cfg.grid().to_dict(), "csv_schema_version": CSV_SCHEMA_VERSION,
            "versions": {"python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "package": _version()},
            "checks": self.checks, "files": files,
        }
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        failed = [k for k, v in self.checks.items() if not v]
        if self.strict and failed:
            raise StrictFailure("failed checks: " + ", ".join(failed))
        return manifest


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")


def _models(cfg):
    grid = cfg.grid()
    return grid, cfg.coefficient("k1"), cfg.coefficient("k2"), cfg.rates(grid)


def _terminal_ensemble(rng, grid, delta, n):
    for _ in range(n):
        z = random_band_limited(rng, grid, (delta, None))
        y = random_band_limited(rng, grid, (delta, None))
        yield TerminalData(z, y, (delta, grid.A))


# --------------------------------------------------------------------------- commands
def cmd_classify(run: Run):
    cfg = run.cfg
    out = {}
    for name in ("k1", "k2"):
        k = cfg.coefficient(name)
        rep = classify_degeneracy(k)
        if rep.degeneracy_class != "none":
            rep.hypothesis_items = check_carleman_hypotheses(k)
        out[name] = rep.to_dict()
        run.check(f"{name}_degenerate_class", rep.degeneracy_class in ("WD", "SD"))
    ok, margin = check_pair_ordering(cfg.coefficient("k1"), cfg.coefficient("k2"))
    out["pair_ordering"] = {"k1_ge_k2": ok, "margin": margin}
    run.write_json("classify.json", out)
    return out


def cmd_simulate(run: Run):
    cfg = run.cfg
    grid, k1, k2, rates = _models(cfg)
    start = CascadeState(cfg.initial("u0", grid), cfg.initial("v0", grid), 0.0)
    traj = solve_forward(start, rates, k1, k2)
    gw = gronwall_check(traj, rates, k1, k2)
    run.write_csv("gronwall.csv", ["t", "F1", "bound1", "F2", "bound2"],
                  zip(map(float, gw.times), map(float, gw.F1), map(float, gw.bound1),
                      map(float, gw.F2), map(float, gw.bound2)))
    run.write_json("gronwall.json", gw.to_dict())
    field_to_csv(run.path("u_final.csv"), traj.u.values[-1], grid, times=[grid.T])
    field_to_csv(run.path("v_final.csv"), traj.v.values[-1], grid, times=[grid.T])
    if cfg.get("simulate.dump_trajectory"):
        field_to_csv(run.path("u_trajectory.csv"), traj.u.values, grid)
        field_to_csv(run.path("v_trajectory.csv"), traj.v.values, grid)
    run.check("gronwall_u", gw.passed1)
    run.check("gronwall_v", gw.passed2)
    return gw.to_dict()


def cmd_adjoint(run: Run):
    cfg = run.cfg
    grid, k1, k2, rates = _models(cfg)
    rng = np.random.default_rng(run.seed)
    delta = float(cfg.get("control.delta"))
    term = next(_terminal_ensemble(rng, grid, delta, 1))
    adj = solve_adjoint(term, rates, k1, k2)
    field_to_csv(run.path("y_initial.csv"), adj.y.values[0], grid)
    field_to_csv(run.path("z_initial.csv"), adj.z.values[0], grid)
    # oracle comparison at every node where fertility cannot act along the characteristic
    rows, num, den = [], 0.0, 0.0
    for n in range(grid.Nt + 1):
        for j in range(grid.Na + 1):
            t, a = n * grid.dt, j * grid.da
            try:
                prof = characteristic_eval(term.y, rates, k2, t, a)
            except ValueError:
                continue
            ref = adj.y.values[n, j]
            e = float(np.max(np.abs(prof - ref)))
            rows.append((t, a, e))
            num += float(np.sum((prof - ref) ** 2))
            den += float(np.sum(ref ** 2))
    rel = float(np.sqrt(num / den)) if den > 0 else 0.0
    run.write_csv("characteristic.csv", ["t", "a", "max_abs_diff"], rows)
    trials = int(cfg.get("adjoint.trials"))
    tc = transpose_check(rates, k1, k2, trials=trials, coupled=True, seed=run.seed)
    td = transpose_check(rates, k1, k2, trials=trials, coupled=False, seed=run.seed)
    summary = {"characteristic_rel_l2": rel, "characteristic_points": len(rows),
               "transpose_cascade": tc, "transpose_decoupled": td}
    run.write_json("adjoint.json", summary)
    run.check("transpose", max(tc, td) <= 1e-10)
    run.check("characteristic", rel <= 1e-2)
    return summary


def cmd_carleman(run: Run):
    cfg = run.cfg
    grid, k1, k2, rates = _models(cfg)
    comp = cfg.get("carleman.component")
    k = k2 if comp == "y" else k1
    conf = cfg.carleman_config(k)
    rng = np.random.default_rng(run.seed)
    members = []
    for term in _terminal_ensemble(rng, grid, float(cfg.get("control.delta")), int(cfg.get("carleman.members"))):
        adj = solve_adjoint(term, rates, k1, k2)
        traj = adj.y if comp == "y" else adj.z
        members.append((traj, adjoint_forcing(adj, rates, k1, k2, comp)))
    s_list = [float(s) for s in cfg.get("carleman.s")]
    omega = tuple(cfg.get("control.omega"))
    tab = carleman_constant_sweep(members, s_list, conf, k, omega, min_members=1)
    rows = []
    for i, (traj, f) in enumerate(members):
        for s in s_list:
            cs = carleman_sides(traj, f, k, conf.with_s(s), omega)
            rows.append((i, s, cs.lhs, cs.rhs_f, cs.rhs_omega, cs.ratio))
    run.write_csv("carleman.csv", ["member", "s", "lhs", "rhs_f", "rhs_omega", "ratio"], rows)
    run.write_json("carleman_summary.json", tab.to_dict())
    run.check("carleman_finite", bool(np.all(np.isfinite(tab.ratios))))
    return tab.to_dict()


def cmd_observability(run: Run):
    cfg = run.cfg
    grid, k1, k2, rates = _models(cfg)
    delta = float(cfg.get("observability.delta"))
    omega = tuple(cfg.get("control.omega"))
    rng = np.random.default_rng(run.seed)
    rows, ratios, band_zero = [], {v: [] for v in VARIANTS}, True
    for i, term in enumerate(_terminal_ensemble(rng, grid, delta, int(cfg.get("observability.members")))):
        adj = solve_adjoint(term, rates, k1, k2)
        for v in VARIANTS:
            if v.startswith("delta") and delta <= max(rates.abar1, rates.abar2):
                continue
            o = observability_sides(adj, term, delta, v, rates, k1, k2, omega)
            ratios[v].append(o.ratio)
            if v.startswith("delta"):
                band_zero &= all(val == 0.0 for key, val in o.terms.items() if key.startswith("terminal"))
            rows.append((i, v, o.lhs, json.dumps(o.terms, sort_keys=True), o.rhs, o.ratio))
    run.write_csv("observability.csv", ["member", "variant", "lhs", "terms", "rhs", "ratio"], rows)
    summary = {v: {"max_ratio": max(r) if r else None, "members": len(r)} for v, r in ratios.items()}
    summary["terminal_band_terms_zero"] = band_zero
    run.write_json("observability_summary.json", summary)
    run.check("observability_finite", all(np.isfinite(x) for r in ratios.values() for x in r))
    run.check("terminal_band_zero", band_zero)
    return summary


def cmd_hum(run: Run):
    cfg = run.cfg
    grid, k1, k2, rates = _models(cfg)
    setup = cfg.control_setup()
    u0, v0 = cfg.initial("u0", grid), cfg.initial("v0", grid)
    if cfg.get("control.full"):
        res = null_control_full(u0, v0, rates, k1, k2, setup)
        times = None
    else:
        res = synthesize_control(u0, v0, HumProblem(rates, k1, k2, setup))
        times = res.trajectory.u.times
    field_to_csv(run.path("control.csv"), res.control, grid, times=times)
    end = res.trajectory.final()
    field_to_csv(run.path("u_final.csv"), end.u, grid, times=[grid.T])
    field_to_csv(run.path("v_final.csv"), end.v, grid, times=[grid.T])
    rep = res.report.to_dict()
    run.write_json("hum_report.json", rep)
    run.check("residual_drop", rep["residual_drop"] >= 100)
    run.check("solver_converged", all(s["converged"] for s in rep["stages"].values()))
    return rep


def _sweep_member(args):
    command, cfg, out, seed = args
    run = Run(command, cfg, out, seed, False, 1)
    result = HANDLERS[command](run)
    run.finish()
    return result


def cmd_sweep(run: Run):
    cfg = run.cfg
    command = cfg.get("sweep.command")
    if command not in HANDLERS or command == "sweep":
        raise ConfigError("sweep.command", f"must be one of {[c for c in COMMANDS if c != 'sweep']}",
                          cfg.lines.get("sweep.command"))
    axis = cfg.get("sweep.axis")
    values = cfg.get("sweep.values")
    jobs = []
    for i, val in enumerate(values):
        jobs.append((command, cfg.with_value(axis, val), run.out / f"run_{i:03d}", run.seed))
    if run.threads > 1:
        with ProcessPoolExecutor(max_workers=run.threads) as ex:
            results = list(ex.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(j) for j in jobs]
    rows = []
    for i, (val, res) in enumerate(zip(values, results)):
        flat = {k: v for k, v in res.items() if isinstance(v, (int, float, bool, str)) or v is None}
        rows.append((i, val, json.dumps(flat, sort_keys=True, default=_jsonable)))
    run.write_csv("sweep.csv", ["run", axis, "summary"], rows)
    run.write_json("sweep_summary.json", {"command": command, "axis": axis, "values": values,
                                          "results": results})
    return {"runs": len(values)}


HANDLERS = {"classify": cmd_classify, "simulate": cmd_simulate, "adjoint": cmd_adjoint,
            "carleman": cmd_carleman, "observability": cmd_observability, "hum": cmd_hum,
            "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="degcascade", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None, help="YAML experiment config")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.default()
        seed = int(cfg.get("seed")) if args.seed is None else args.seed
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        run = Run(args.command, cfg, args.out, seed, args.strict, args.threads)
        HANDLERS[args.command](run)
        run.finish()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StrictFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 3
    print(f"{args.command}: outputs written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
