"""Command-line interface: ``sbmkit {eval,certify,simulate,verify}``.

Every run writes ``run_config.json`` next to its outputs; passing that file
back through ``--config`` repeats the run exactly.  Exit statuses: 0 success,
1 verification failure, 2 usage or precondition error, 3 certification
failure, 4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bernstein, kernels, laplace, renewal, simulate, verify
from .bernstein import FAMILIES, BernsteinSpec
from .errors import CertificationError, DomainError, SbmError
from .rng import RandomSource

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_CERT, EXIT_NUMERIC = 0, 1, 2, 3, 4

EVAL_FUNCTIONS = ("phi", "phi_prime", "capital_phi", "capital_phi_inv", "chi", "V", "mu", "u", "j", "g", "p", "estimates")
SIM_TASKS = ("exit-ball", "exit-density", "survival", "heat-kernel", "bhp")


class UsageError(DomainError):
    pass


# ---------------------------------------------------------------- parsing helpers


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:points_per_decade`` to a log-spaced grid including both ends."""
    try:
        lo, hi, ppd = text.split(":")
        lo, hi, ppd = float(lo), float(hi), int(ppd)
    except ValueError:
        raise UsageError(f"grid must look like lo:hi:points_per_decade, got {text!r}") from None
    if not (0 < lo < hi) or ppd < 1:
        raise UsageError("grid needs 0 < lo < hi and points_per_decade >= 1")
    return verify.log_grid(lo, hi, ppd)


def _parse_value(v: str):
    try:
        return json.loads(v)
    except json.JSONDecodeError:
        return v


def parse_pairs(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v.strip())
    return out


def parse_point(text: str | None, d: int, default=None) -> np.ndarray:
    if text is None:
        if default is None:
            raise UsageError("a point is required")
        return np.asarray(default, dtype=float)
    try:
        x = np.array([float(v) for v in str(text).split(",")])
    except ValueError:
        raise UsageError(f"point must be comma-separated numbers, got {text!r}") from None
    if x.size == 1 and d > 1:
        x = np.concatenate([np.zeros(d - 1), x])
    if x.size != d:
        raise UsageError(f"point needs {d} coordinates")
    return x


def load_spec(rc: "RunConfig") -> BernsteinSpec:
    return BernsteinSpec.from_dict(rc.spec)


# ---------------------------------------------------------------- run configuration


@dataclasses.dataclass
class RunConfig:
    """Everything that determines a run; serialized as ``run_config.json``."""

    command: str
    spec: dict
    d: int = 1
    seed: int = 0
    output_dir: str = "."
    params: dict = dataclasses.field(default_factory=dict)
    quadrature: dict = dataclasses.field(default_factory=dict)
    workers: int | None = None

    def quadrature_config(self) -> laplace.QuadratureConfig:
        valid = {f.name for f in dataclasses.fields(laplace.QuadratureConfig)}
        bad = set(self.quadrature) - valid
        if bad:
            raise UsageError(f"unknown quadrature settings {sorted(bad)}; valid: {', '.join(sorted(valid))}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in self.quadrature.items()}
        return laplace.DEFAULT_CONFIG.with_overrides(**kw)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown RunConfig fields {sorted(unknown)}")
        return cls(**data)


def run_config_schema() -> dict:
    spec_schema = {
        "type": "object",
        "required": ["family"],
        "properties": {
            "family": {"enum": list(FAMILIES)},
            "params": {"type": "object", "additionalProperties": {"type": "number"}},
            "normalize": {"type": "boolean"},
            "expr": {"type": "string", "description": "custom family: numpy expression in lam"},
        },
    }
    quad = {f.name: {"description": f"default {f.default!r}"} for f in dataclasses.fields(laplace.QuadratureConfig)}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "RunConfig",
        "type": "object",
        "required": ["command", "spec"],
        "additionalProperties": False,
        "properties": {
            "command": {"enum": ["eval", "certify", "simulate", "verify"]},
            "spec": spec_schema,
            "d": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "output_dir": {"type": "string"},
            "params": {"type": "object", "description": "command-specific parameters"},
            "quadrature": {"type": "object", "properties": quad, "additionalProperties": False},
            "workers": {"type": ["integer", "null"], "minimum": 1},
        },
    }


# ---------------------------------------------------------------- output helpers


def _out_dir(rc: RunConfig) -> Path:
    p = Path(rc.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_csv(path: Path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) for v in row])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------- eval


def _stable_oracle(spec: BernsteinSpec, fn: str, x, d: int, t: float):
    """Closed forms for the pure-power family, or None."""
    if spec.family != "pure_power":
        return None
    a = spec.p["alpha"]
    b = a / 2
    if fn in ("phi", "chi"):
        return x**b
    if fn == "mu":
        return b / math.gamma(1 - b) * x ** (-1 - b)
    if fn == "u":
        return x ** (b - 1) / math.gamma(b)
    if fn == "V":
        return x**b / math.gamma(1 + b)
    if fn == "j":
        return kernels.stable_jump_constant(d, a) * x ** (-d - a)
    if fn == "g" and d > a:
        return kernels.riesz_constant(d, a) * x ** (a - d)
    if fn == "p" and a == 1.0 and d == 1:
        return t / (math.pi * (t * t + x * x))
    return None


def cmd_eval(rc: RunConfig) -> int:
    spec = load_spec(rc)
    qc = rc.quadrature_config()
    fn = rc.params.get("fn")
    if fn not in EVAL_FUNCTIONS:
        raise UsageError(f"--fn must be one of {', '.join(EVAL_FUNCTIONS)}")
    x = parse_grid(rc.params.get("grid", "1e-3:1e3:16"))
    d, t = rc.d, float(rc.params.get("t", 1.0))
    if fn == "estimates":
        header = ["r", "j_estimate", "g_estimate", "p_estimate"]
        cols = [x, kernels.j_estimate(spec, d, x), kernels.g_estimate(spec, d, x), kernels.p_estimate(spec, d, t, x)]
    else:
        compute = {
            "phi": lambda: bernstein.eval_phi(spec, x),
            "phi_prime": lambda: bernstein.eval_phi_prime(spec, x),
            "capital_phi": lambda: bernstein.capital_phi(spec, x),
            "capital_phi_inv": lambda: bernstein.capital_phi_inv(spec, x),
            "chi": lambda: renewal.ladder_exponent_chi(spec, x),
            "V": lambda: renewal.renewal_table(spec, config=qc).V(x),
            "mu": lambda: laplace.levy_density_mu(spec, x, qc),
            "u": lambda: laplace.potential_density_u(spec, x, qc),
            "j": lambda: kernels.jump_density_j(spec, d, x, qc),
            "g": lambda: kernels.green_radial_g(spec, d, x, qc),
            "p": lambda: kernels.free_heat_kernel(spec, d, t, x, qc),
        }
        header = ["x", fn]
        cols = [x, np.asarray(compute[fn](), dtype=float)]
        oracle = _stable_oracle(spec, fn, x, d, t)
        if oracle is not None:
            header.append("oracle")
            cols.append(oracle)
    path = _out_dir(rc) / f"{fn}.csv"
    write_csv(path, header, cols)
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------- certify


def cmd_certify(rc: RunConfig) -> int:
    spec = load_spec(rc)
    out = _out_dir(rc) / "certificate.json"
    try:
        cert = bernstein.certify(
            spec, float(rc.params.get("decades", 8.0)), int(rc.params.get("points_per_decade", 64))
        )
    except CertificationError as exc:
        write_json(out, {"spec": spec.name, "certified": False, "side": exc.side, "pair": exc.pair, "message": str(exc)})
        print(f"certification failed on side {exc.side}: {exc}", file=sys.stderr)
        return EXIT_CERT
    write_json(out, {"certified": True, **cert.to_dict()})
    print(cert.to_json())
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(rc: RunConfig) -> int:
    spec = load_spec(rc)
    qc = rc.quadrature_config()
    p = rc.params
    task = p.get("task")
    if task not in SIM_TASKS:
        raise UsageError(f"simulate task must be one of {', '.join(SIM_TASKS)}")
    d = rc.d
    n = int(p.get("n", 100000))
    if n < 100:
        raise UsageError("need n >= 100 paths")
    sampler = simulate.make_sampler(spec, p.get("strategy"), config=qc)
    source = RandomSource(rc.seed)
    dt = p.get("dt")
    out = _out_dir(rc)
    summary: dict = {"task": task, "spec": spec.name, "d": d, "n": n, "seed": rc.seed, "strategy": sampler.strategy}
    if task in ("exit-ball", "exit-density"):
        radius = float(p.get("radius", 1.0))
        x = parse_point(p.get("x"), d, np.zeros(d))
        if task == "exit-ball":
            res = simulate.mc_exit_ball(spec, sampler, d, np.zeros(d), radius, x, n, dt, source, workers=rc.workers)
            summary["mean_exit_time"] = res.mean_exit_time.to_dict()
            if spec.family == "pure_power":
                summary["oracle"] = simulate.stable_exit_time_mean(d, spec.p["alpha"], radius, float(np.linalg.norm(x)))
            write_csv(out / "exit_positions.csv", [f"x{k}" for k in range(d)], res.exit_positions.T)
        else:
            rep = simulate.mc_exit_density_check(spec, sampler, d, radius, n, dt, source, config=qc, workers=rc.workers)
            write_csv(
                out / "exit_shells.csv",
                ["r_lo", "r_hi", "hits", "density", "std_error", "lower_comparator", "upper_comparator", "usable"],
                [rep.edges[:-1], rep.edges[1:], rep.hits, rep.density, rep.std_error, rep.lower_comparator,
                 rep.upper_comparator, rep.usable],
            )  # fmt: skip
    elif task == "survival":
        x = parse_point(p.get("x", "1"), d)
        est = simulate.mc_survival_half_space(spec, sampler, d, x, float(p.get("t", 1.0)), n, dt, source, rc.workers)
        summary["survival"] = est.to_dict()
    elif task == "heat-kernel":
        t = float(p.get("t", 1.0))
        x = parse_point(p.get("x", "1"), d)
        scale = bernstein.capital_phi_inv(spec, t)
        cells = simulate.log_cells(d, 1e-2 * scale, 1e2 * scale, int(p.get("cells", 40)), 0.5 * scale)
        res = simulate.mc_half_space_heat_kernel(spec, sampler, d, t, x, cells, n, dt, source, workers=rc.workers)
        summary["survival"] = res.survival.to_dict()
        summary["usable_cells"] = int(sum(c.usable for c in res.cells))
        write_csv(
            out / "heat_kernel_cells.csv",
            ["center_d", "hits", "density", "std_error", "comparator", "usable"],
            [[c.center[-1] for c in res.cells], [c.hits for c in res.cells], [c.estimate.value for c in res.cells],
             [c.estimate.std_error for c in res.cells], [c.comparator for c in res.cells], [c.usable for c in res.cells]],
        )  # fmt: skip
    else:
        R = float(p.get("R", 1.0))
        rows = verify.bhp_pairs(spec, sampler, d, R, n, source, rc.workers, int(p.get("points", 5)))
        write_csv(
            out / "bhp_pairs.csv",
            ["depth_x", "depth_y", "double_ratio", "double_se", "single_ratio", "single_se", "comparator"],
            [[r[0][0] for r in rows], [r[0][1] for r in rows], [r[1].double_ratio.value for r in rows],
             [r[1].double_ratio.std_error for r in rows], [r[1].single_ratio.value for r in rows],
             [r[1].single_ratio.std_error for r in rows], [r[1].comparator for r in rows]],
        )  # fmt: skip
        summary["pairs"] = len(rows)
    write_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True, default=_jsonable))
    return EXIT_OK


# ---------------------------------------------------------------- verify


def cmd_verify(rc: RunConfig) -> int:
    spec = load_spec(rc)
    p = rc.params
    checks = p.get("checks")
    grid = tuple(p.get("grid", (1e-3, 1e3, 16)))
    if isinstance(p.get("grid"), str):
        lo, hi, ppd = p["grid"].split(":")
        grid = (float(lo), float(hi), int(ppd))
    try:
        cfg = verify.SuiteConfig(
            quadrature_only=bool(p.get("quadrature_only", False)),
            grid=grid,
            mc_n=int(p.get("mc_n", 20000)),
            seed=rc.seed,
            negative_control=p.get("negative_control"),
            workers=rc.workers,
            checks=tuple(checks) if checks else None,
            quadrature=rc.quadrature_config(),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = verify.run_suite(spec, rc.d, cfg)
    verify.write_bundle(result, _out_dir(rc))
    for msg in result.messages():
        print(msg)
    if result.passed:
        print("verification passed")
        return EXIT_OK
    print(f"verification FAILED: {', '.join(result.failed)}", file=sys.stderr)
    return EXIT_VERIFY


COMMANDS = {"eval": cmd_eval, "certify": cmd_certify, "simulate": cmd_simulate, "verify": cmd_verify}


# ---------------------------------------------------------------- argparse


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("spec")
    g.add_argument("--spec", help="path to a BernsteinSpec JSON file")
    g.add_argument("--family", help=f"family name instead of --spec ({', '.join(FAMILIES)})")
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="family parameter (repeatable)")
    g.add_argument("--expr", help="custom family: numpy expression in lam, e.g. 'log1p(lam)'")
    p.add_argument("--config", help="replay a run_config.json (other flags are ignored)")
    p.add_argument("--d", type=int, default=1, help="dimension (default 1)")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    p.add_argument("--out", default=".", help="output directory (default .)")
    p.add_argument("--quad", action="append", metavar="KEY=VALUE", help="QuadratureConfig override (repeatable)")
    p.add_argument("--workers", type=int, default=None, help="threads for Monte Carlo (default: all)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmkit", description=__doc__.splitlines()[0])
    parser.add_argument("--schema", action="store_true", help="print the RunConfig JSON schema and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("eval", help="evaluate a function on a log grid (CSV)")
    _common(p)
    p.add_argument("--fn", required=False, choices=EVAL_FUNCTIONS, help="function to evaluate")
    p.add_argument("--grid", default="1e-3:1e3:16", help="lo:hi:points_per_decade (default 1e-3:1e3:16)")
    p.add_argument("--t", type=float, default=1.0, help="time for p and the p estimate (default 1)")

    p = sub.add_parser("certify", help="fit scaling indices at zero and infinity (JSON)")
    _common(p)
    p.add_argument("--decades", type=float, default=8.0, help="grid half-width in decades (default 8)")
    p.add_argument("--points-per-decade", type=int, default=64)

    p = sub.add_parser("simulate", help="Monte Carlo estimates (JSON summary + CSV)")
    _common(p)
    p.add_argument("task", nargs="?", choices=SIM_TASKS)
    p.add_argument("--n", type=int, default=100000, help="number of paths (default 1e5)")
    p.add_argument("--dt", type=float, default=None, help="time step (default from the length scale)")
    p.add_argument("--strategy", choices=simulate.STRATEGIES, default=None)
    p.add_argument("--radius", type=float, default=1.0, help="ball radius for exit tasks")
    p.add_argument("--x", default=None, help="start point, comma-separated (a single value is x_d)")
    p.add_argument("--t", type=float, default=1.0, help="time for half-space tasks")
    p.add_argument("--cells", type=int, default=40, help="heat-kernel cells")
    p.add_argument("--R", type=float, default=1.0, help="window size for the bhp task")
    p.add_argument("--points", type=int, default=5, help="points per bhp geometry")

    p = sub.add_parser("verify", help="run the comparability suite and write a report bundle")
    _common(p)
    p.add_argument("--quadrature-only", action="store_true", help="skip the Monte Carlo checks")
    p.add_argument("--grid", default="1e-3:1e3:16", help="sweep grid lo:hi:points_per_decade")
    p.add_argument("--mc-n", type=int, default=20000, help="paths per Monte Carlo check")
    p.add_argument("--check", action="append", choices=list(verify.CHECKS), help="run only these checks")
    p.add_argument(
        "--negative-control", choices=["wrong_jump_exponent"], default=None,
        help="inject a wrong comparator; the suite must then fail",
    )  # fmt: skip
    return parser


def _spec_dict(args) -> dict:
    if args.spec:
        path = Path(args.spec)
        if not path.exists():
            raise UsageError(f"spec file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"spec file is not valid JSON: {exc}") from None
    elif args.family:
        data = {"family": args.family, "params": parse_pairs(args.param)}
        if args.expr:
            data["expr"] = args.expr
    elif args.expr:
        data = {"family": "custom", "expr": args.expr}
    else:
        raise UsageError("give --spec FILE, --family NAME or --expr EXPR")
    BernsteinSpec.from_dict(data)  # validate early
    return data


def _params(args) -> dict:
    c = args.command
    if c == "eval":
        if args.fn is None:
            raise UsageError("eval needs --fn")
        return {"fn": args.fn, "grid": args.grid, "t": args.t}
    if c == "certify":
        return {"decades": args.decades, "points_per_decade": args.points_per_decade}
    if c == "simulate":
        if args.task is None:
            raise UsageError(f"simulate needs a task: {', '.join(SIM_TASKS)}")
        keys = ("task", "n", "dt", "strategy", "radius", "x", "t", "cells", "R", "points")
        return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    return {
        "quadrature_only": args.quadrature_only,
        "grid": args.grid,
        "mc_n": args.mc_n,
        "checks": args.check,
        "negative_control": args.negative_control,
    }


def config_from_args(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        rc = RunConfig.from_json(path.read_text())
        if rc.command != args.command:
            raise UsageError(f"config is for {rc.command!r}, not {args.command!r}")
        return rc
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    return RunConfig(
        command=args.command,
        spec=_spec_dict(args),
        d=args.d,
        seed=args.seed,
        output_dir=args.out,
        params=_params(args),
        quadrature=parse_pairs(args.quad),
        workers=args.workers,
    )


def run(rc: RunConfig) -> int:
    """Execute a RunConfig and return the exit status."""
    try:
        status = COMMANDS[rc.command](rc)
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except SbmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    (_out_dir(rc) / "run_config.json").write_text(rc.to_json())
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.schema:
        print(json.dumps(run_config_schema(), indent=2, sort_keys=True))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        rc = config_from_args(args)
    except SbmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    return run(rc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
