"""Batch command line: solve a growth model and emit verification reports.

    clarkedp --command envelope --model spec.json --grid 800 --points auto --out run/

Exit status is 0 when every requested verification passes, 2 when one fails
and 1 on input or configuration errors (with an error JSON on stdout).
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import envelope as env
from .dp import Grid, extract_policy, finite_horizon_oracle, oracle_sandwich, solve_value_iteration
from .errors import ClarkeDPError, MaxIterExceeded
from .models import build_rck, load_spec
from .nonsmooth import SCALE_COLUMNS, scale_table

log = logging.getLogger("clarkedp")

COMMANDS = ("solve", "envelope", "audit", "clarke", "oracle")
ORACLE_HORIZON = 6
ORACLE_KNOTS = 40


@dataclass
class RunConfig:
    command: str
    model_path: str
    grid_size: int = 400
    tol: float = 1e-6
    test_points: object = "auto"
    output_dir: str = "."
    seed: int = 0
    verify_tol: float = 1e-2
    max_iter: int = 5000

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.grid_size < 16:
            raise ConfigError("grid size must be at least 16")
        if not self.tol > 0 or not self.verify_tol > 0:
            raise ConfigError("tolerances must be positive")
        if self.max_iter < 1:
            raise ConfigError("max-iter must be positive")


class ConfigError(ClarkeDPError):
    code = "ConfigError"


def parse_points(text):
    if text is None or text.strip() == "auto":
        return "auto"
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse points {text!r}") from None


def model_grid(model, n):
    """Geometric knots on [0.02, 1.05] K* (relative spacing is what the estimators need)."""
    K = model.meta.get("K_star", model.state_domain[1] / 1.05)
    return Grid(np.geomspace(0.02 * K, model.state_domain[1], n))


def auto_points(V, n=11):
    lo, hi = V.trusted_range()
    return [lo + (hi - lo) * i / (n + 1) for i in range(1, n + 1)]


def resolve_points(cfg, model, V):
    pts = auto_points(V) if cfg.test_points == "auto" else list(cfg.test_points)
    lo, hi = model.state_domain
    bad = [p for p in pts if not lo < p < hi]
    if bad or not pts:
        raise ConfigError(f"test points must lie inside ({lo:g}, {hi:g}); got {bad or pts}")
    return pts


# -- output helpers -------------------------------------------------------

def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _json(obj):
    return json.dumps(env._jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_solution(out, V, policy, report):
    k = V.grid.knots
    atomic_write(os.path.join(out, "value.csv"),
                 _csv(("knot", "value", "trusted_flag"),
                      [(k[i], V.values[i], str(bool(V.trusted[i])).lower()) for i in range(k.size)]))
    m = max((len(s) for s in policy.sets), default=0)
    m = max(m, 1)
    rows = [(k[i], *[float(y) for y in s], *[""] * (m - len(s))) for i, s in enumerate(policy.sets)]
    atomic_write(os.path.join(out, "policy.csv"),
                 _csv(("knot", *[f"policy_{j + 1}" for j in range(m)]), rows))
    atomic_write(os.path.join(out, "solve_report.json"), _json(report.to_dict(include_time=False)))


# -- commands -------------------------------------------------------------

def _solve(cfg, model):
    grid = model_grid(model, cfg.grid_size)
    t = time.perf_counter()
    ok = True
    try:
        V, report = solve_value_iteration(model, grid, tol=cfg.tol, max_iter=cfg.max_iter)
    except MaxIterExceeded as exc:
        V, report = exc.partial
        ok = False
        log.warning("value iteration did not converge: %s", exc)
    policy = extract_policy(model, V)
    log.info("solved on %d knots in %.2f s (%d iterations)", len(grid),
             time.perf_counter() - t, report.iterations)
    return V, policy, report, ok


def _sweep(cfg, model, V, policy):
    pts = resolve_points(cfg, model, V)
    results = env.sweep(model, V, policy, pts, tol=cfg.verify_tol, seed=cfg.seed,
                        tol_scale=lambda x: max(1.0, V.lipschitz(*_window(V, x))))
    atomic_write(os.path.join(cfg.output_dir, "envelope.csv"), env.sweep_csv(results))
    audit = [dict(r.audit.to_dict(), envelope=r.envelope.to_dict(), verdict=r.verdict)
             for r in results]
    atomic_write(os.path.join(cfg.output_dir, "audit.json"), _json({"points": audit}))
    return results


def _window(V, x):
    h = 4.0 * V.grid.local_mesh(x)
    return x - h, x + h


def cmd_solve(cfg, model):
    V, policy, report, ok = _solve(cfg, model)
    write_solution(cfg.output_dir, V, policy, report)
    return ok


def cmd_envelope(cfg, model):
    V, policy, report, ok = _solve(cfg, model)
    write_solution(cfg.output_dir, V, policy, report)
    results = _sweep(cfg, model, V, policy)
    return ok and all(r.verdict == "true" for r in results)


def cmd_audit(cfg, model):
    V, policy, report, ok = _solve(cfg, model)
    write_solution(cfg.output_dir, V, policy, report)
    results = _sweep(cfg, model, V, policy)
    return ok and all(r.audit.all_ok for r in results)


def cmd_clarke(cfg, model):
    V, policy, report, ok = _solve(cfg, model)
    pts = resolve_points(cfg, model, V)
    rows, all_ok = [], ok
    for x in pts:
        sched = env.value_schedule(V, x, cfg.seed)
        tol = cfg.verify_tol * max(1.0, V.lipschitz(*_window(V, x)))
        try:
            env.clarke_of_value(V, x, sched, tol)
            for v in (1.0, -1.0):
                for row in scale_table(V.as_map(), x, v, sched):
                    rows.append((float(x), v, *row))
        except ClarkeDPError as exc:
            log.warning("clarke probe at %g failed: %s", x, exc)
            all_ok = False
    atomic_write(os.path.join(cfg.output_dir, "clarke.csv"),
                 _csv(("x_bar", "direction", *SCALE_COLUMNS), rows))
    return all_ok


def cmd_oracle(cfg, model):
    V, policy, report, ok = _solve(cfg, model)
    pts = resolve_points(cfg, model, V)
    og = Grid(np.linspace(V.grid.lo, V.grid.hi, ORACLE_KNOTS))
    lo, hi = V.trusted_range()
    finite = V.values[V.trusted]
    tail_lo, tail_hi = float(finite.min()), float(finite.max())
    slack = V.lipschitz(lo, hi) * og.mesh
    records = []
    for x in pts:
        val, path = finite_horizon_oracle(model, x, ORACLE_HORIZON, og, return_path=True)
        verdict = oracle_sandwich(float(V(x)), val, model.delta, ORACLE_HORIZON,
                                  tail_lo, tail_hi, slack)
        ok &= bool(verdict)
        records.append({"k0": x, "horizon": ORACLE_HORIZON, "oracle_value": val, "path": path,
                        "ok": bool(verdict), **verdict.witness})
    atomic_write(os.path.join(cfg.output_dir, "oracle.json"),
                 _json({"oracle_knots": ORACLE_KNOTS, "tail": [tail_lo, tail_hi],
                        "points": records}))
    return ok


HANDLERS = {"solve": cmd_solve, "envelope": cmd_envelope, "audit": cmd_audit,
            "clarke": cmd_clarke, "oracle": cmd_oracle}


def run(cfg):
    """Execute one command; returns the exit status."""
    cfg.validate()
    os.makedirs(cfg.output_dir, exist_ok=True)
    model = build_rck(load_spec(cfg.model_path))
    if cfg.test_points != "auto":
        resolve_points(cfg, model, None)
    return 0 if HANDLERS[cfg.command](cfg, model) else 2


def build_parser():
    p = argparse.ArgumentParser(prog="clarkedp", description=__doc__.splitlines()[0])
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--model", required=True, help="JSON model spec")
    p.add_argument("--grid", type=int, default=400, help="number of grid knots (>= 16)")
    p.add_argument("--tol", type=float, default=1e-6, help="value iteration tolerance")
    p.add_argument("--verify-tol", type=float, default=1e-2,
                   help="verification tolerance at unit Lipschitz scale")
    p.add_argument("--max-iter", type=int, default=5000, help="value iteration cap")
    p.add_argument("--points", default="auto", help='comma-separated states or "auto"')
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = RunConfig(args.command, args.model, args.grid, args.tol,
                        parse_points(args.points), args.out, args.seed, args.verify_tol,
                        args.max_iter)
        return run(cfg)
    except (ClarkeDPError, OSError, ValueError) as exc:
        code = exc.code if isinstance(exc, ClarkeDPError) else type(exc).__name__
        print(json.dumps({"error": code, "message": str(exc)}, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())
