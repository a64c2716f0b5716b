"""Command-line front end: reproducible runs with serialized traces.

Four commands share one config surface:

* ``anneal``    - simulated annealing; JSON report + trajectory CSV.
* ``ipm``       - barrier path following; JSON report + path CSV.
* ``heatpath``  - heat path vs central path on a temperature grid; CSV.
* ``diagnose``  - annealing plus per-epoch oracle diagnostics; CSV.

A run is a pure function of its config (seed included): reports echo the
fully resolved config, CSV columns are fixed and versioned, and repeated
runs are byte-identical.  Wall-clock timing is deliberately kept out of
the serialized outputs and printed to stderr instead.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import annealing, equivalence, ipm
from .bodies import ConvexBody

TRACE_VERSION = 1

#: Per-chain streams are SeedSequence((seed, stream)); streams are assigned
#: by role: 0 the main chain, 1..m the replicas, 10000+ sampled-IPM chains.
RNG_SCHEME = "seedsequence(seed,stream); streams: main=0, replicas=1..m, sampled-ipm>=10000"


class ConfigError(ValueError):
    """Raised when a run configuration cannot be validated."""


@dataclass
class RunConfig:
    command: str
    body_kind: str = "box"
    body_file: Optional[str] = None
    lo: Optional[list[float]] = None
    hi: Optional[list[float]] = None
    n: Optional[int] = None
    radius: Optional[float] = None
    theta: list[float] = field(default_factory=list)
    eps: float = 0.05
    seed: int = 0
    schedule: str = "entropic"
    nu: Optional[float] = None
    c_mix: float = 1.0
    steps: Optional[int] = None
    replicas: Optional[int] = None
    grid: int = 7
    barrier: str = "entropic"
    path_c: float = ipm.DEFAULT_PATH_C
    out_dir: str = "."

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "RunConfig":
        return cls.from_dict(json.loads(s))


def _parse_floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annealipm")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("anneal", "ipm", "heatpath", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("--body", default="box", choices=["box", "ball", "simplex", "hpoly"])
        p.add_argument("--file", default=None, help="JSON H-polytope {n, A, b, x0?, R?}")
        p.add_argument("--lo", default=None, help="box lower bounds (scalar or comma list)")
        p.add_argument("--hi", default=None, help="box upper bounds (scalar or comma list)")
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--radius", type=float, default=None)
        p.add_argument("--theta", required=True, help="objective vector, comma separated")
        p.add_argument("--eps", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--schedule", default="entropic", choices=["classic", "entropic"])
        p.add_argument("--nu", type=float, default=None)
        p.add_argument("--c-mix", type=float, default=1.0, dest="c_mix")
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--grid", type=int, default=7)
        p.add_argument("--barrier", default="entropic", choices=["log", "entropic"])
        p.add_argument("--path-c", type=float, default=ipm.DEFAULT_PATH_C, dest="path_c")
        p.add_argument("--out-dir", default=".", dest="out_dir")
    return parser


def config_from_args(argv: list[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    return RunConfig(
        command=args.command,
        body_kind=args.body,
        body_file=args.file,
        lo=_parse_floats(args.lo) if args.lo else None,
        hi=_parse_floats(args.hi) if args.hi else None,
        n=args.n,
        radius=args.radius,
        theta=_parse_floats(args.theta),
        eps=args.eps,
        seed=args.seed,
        schedule=args.schedule,
        nu=args.nu,
        c_mix=args.c_mix,
        steps=args.steps,
        replicas=args.replicas,
        grid=args.grid,
        barrier=args.barrier,
        path_c=args.path_c,
        out_dir=args.out_dir,
    )


def _build_body(config: RunConfig) -> ConvexBody:
    kind = config.body_kind
    if kind == "box":
        if config.lo is None or config.hi is None:
            raise ConfigError("box bodies need --lo and --hi")
        lo, hi = config.lo, config.hi
        if len(lo) == 1 and len(hi) == 1:
            if config.n is None:
                raise ConfigError("scalar box bounds need --n")
            return ConvexBody.box(lo[0], hi[0], n=config.n)
        return ConvexBody.box(lo, hi)
    if kind == "ball":
        if config.n is None:
            raise ConfigError("ball bodies need --n")
        return ConvexBody.ball(config.n, radius=config.radius or 1.0)
    if kind == "simplex":
        if config.n is None:
            raise ConfigError("simplex bodies need --n")
        return ConvexBody.simplex(config.n)
    if kind == "hpoly":
        if config.body_file is None:
            raise ConfigError("hpoly bodies need --file")
        spec = json.loads(Path(config.body_file).read_text())
        for key in ("n", "A", "b"):
            if key not in spec:
                raise ConfigError(f"H-polytope file is missing {key!r}")
        A = np.asarray(spec["A"], dtype=float)
        if A.shape != (len(spec["b"]), spec["n"]):
            raise ConfigError("H-polytope A has inconsistent shape")
        return ConvexBody.hpolytope(A, spec["b"], x0=spec.get("x0"), R=spec.get("R"))
    raise ConfigError(f"unknown body kind {kind!r}")


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def _report(config: RunConfig, results: dict) -> dict:
    return {
        "trace_version": TRACE_VERSION,
        "config": config.to_dict(),
        "rng_scheme": RNG_SCHEME,
        "results": results,
    }


def _run_anneal(config: RunConfig, body: ConvexBody, out: Path, diagnostics: bool) -> dict:
    theta_hat = np.asarray(config.theta, dtype=float)
    sched = annealing.make_schedule(config.schedule, body, theta_hat, config.eps, nu=config.nu)
    sampler = annealing.SamplerConfig(seed=config.seed, c_mix=config.c_mix,
                                      steps=config.steps, replicas=config.replicas)
    report = annealing.anneal(body, theta_hat, sched, sampler)
    header = ["trace_version", "epoch", "t", *(f"x{i + 1}" for i in range(body.n)), "gap_bound"]
    rows = [[TRACE_VERSION, k + 1, p.t, *p.x, p.gap_bound]
            for k, p in enumerate(report.trajectory)]
    _write_csv(out / "trajectory.csv", header, rows)
    results = {
        "epochs": sched.epochs,
        "t1": sched.t1,
        "shrink": sched.shrink,
        "final_x": [float(v) for v in report.final_x],
        "final_objective": float(theta_hat @ report.final_x),
        "final_gap_bound": report.final_gap_bound,
        "oracle_calls": report.oracle_calls,
        "retries": report.retries,
    }
    print(f"anneal: {sched.epochs} epochs, wallclock {report.wallclock_seconds:.2f}s",
          file=sys.stderr)
    if diagnostics:
        diag = annealing.epoch_diagnostics(report)
        header = ["trace_version", "epoch", "t", "isotropy_c", "mean_error",
                  "mean_error_se_units", "l2_to_previous"]
        rows = [[TRACE_VERSION, d.epoch, d.t,
                 "" if d.isotropy_c is None else _fmt(d.isotropy_c),
                 "" if d.mean_error is None else _fmt(d.mean_error),
                 "" if d.mean_error_se_units is None else _fmt(d.mean_error_se_units),
                 "" if d.l2_to_previous is None else _fmt(d.l2_to_previous)]
                for d in diag]
        _write_csv(out / "diagnostics.csv", header, rows)
    return results


def _run_ipm(config: RunConfig, body: ConvexBody, out: Path) -> dict:
    theta_hat = np.asarray(config.theta, dtype=float)
    if config.barrier == "log":
        backend = ipm.LogBarrier(body, nu=config.nu)
    else:
        backend = ipm.EntropicBarrier(body, nu=config.nu)
    states = ipm.follow_path(backend, body, theta_hat, config.eps, c=config.path_c)
    cert = backend.nu + np.sqrt(backend.nu) / 4.0
    header = ["trace_version", "k", "t", "lambda", "gap_bound",
              *(f"x{i + 1}" for i in range(body.n))]
    rows = [[TRACE_VERSION, s.k, s.t, s.decrement, cert / s.t, *s.x_hat] for s in states]
    _write_csv(out / "path.csv", header, rows)
    final = states[-1]
    return {
        "barrier": config.barrier,
        "nu": backend.nu,
        "epochs": final.k,
        "final_x": [float(v) for v in final.x_hat],
        "final_objective": float(theta_hat @ final.x_hat),
        "final_gap_bound": float(cert / final.t),
    }


def _run_heatpath(config: RunConfig, body: ConvexBody, out: Path) -> dict:
    theta_hat = np.asarray(config.theta, dtype=float)
    temps = equivalence.default_temperature_grid(body, config.grid)
    heat = equivalence.heat_path(body, theta_hat, temps)
    if config.barrier == "log":
        backend = ipm.LogBarrier(body, nu=config.nu)
    else:
        backend = ipm.EntropicBarrier(body, nu=config.nu)
    central = equivalence.central_path(body, theta_hat, backend, temps)
    cmp_ = equivalence.compare_paths(heat, central)
    header = ["trace_version", "t", "source", *(f"x{i + 1}" for i in range(body.n)), "residual"]
    rows = [[TRACE_VERSION, p.t, p.source, *p.x, p.residual]
            for p in (*cmp_.heat, *cmp_.central)]
    _write_csv(out / "heatpath.csv", header, rows)
    return {
        "temperatures": [float(t) for t in temps],
        "residuals": [float(r) for r in cmp_.residuals],
        "max_residual": cmp_.max_residual,
        "barrier": config.barrier,
    }


def run(config: RunConfig) -> int:
    """Execute a validated config; returns a process exit status."""
    try:
        if not config.theta:
            raise ConfigError("objective vector is empty")
        body = _build_body(config)
        theta = np.asarray(config.theta, dtype=float)
        if theta.shape != (body.n,):
            raise ConfigError(f"theta has {theta.size} entries, body dimension is {body.n}")
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if config.command == "anneal":
            results = _run_anneal(config, body, out, diagnostics=False)
        elif config.command == "diagnose":
            results = _run_anneal(config, body, out, diagnostics=True)
        elif config.command == "ipm":
            results = _run_ipm(config, body, out)
        elif config.command == "heatpath":
            results = _run_heatpath(config, body, out)
        else:
            raise ConfigError(f"unknown command {config.command!r}")
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stdout)
        return 2
    report = _report(config, results)
    (Path(config.out_dir) / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report["results"], sort_keys=True))
    return 0


def main(argv: Optional[list[str]] = None) -> None:
    if argv is None:
        argv = sys.argv[1:]
    sys.exit(run(config_from_args(argv)))


if __name__ == "__main__":
    main()
