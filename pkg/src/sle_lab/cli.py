"""Experiment driver: config ingestion, subcommands, deterministic outputs.

Outputs are CSV (data tables) and JSON (structured reports); every output
file gets a ``<name>.meta.json`` sidecar carrying the config hash and tool
version.  Identical config and seed produce byte-identical files: floats
are written with shortest round-trip formatting and nothing time- or
host-dependent enters the payloads.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .driving import SimulationConfig, simulate
from .errors import (
    ConfigError,
    ContinuationFailed,
    DomainError,
    GapUnderflow,
    InconclusiveTruncation,
    NotBoundaryRegular,
    OrderingViolated,
    SchemaError,
    SingularityError,
    ZeroMeanMeasure,
)
from .limits import ALREADY_FULL, convergence_study, support_time
from .loewner import LimitDrivingPath, hull_boundary, trace_curves
from .measures import CircleMeasure, HerglotzField
from .semigroup import (
    GeneratorS,
    characteristic_solve,
    coefficient_ode,
    eta_series_from_moments,
    free_mult_convolve,
    moment_hierarchy,
    moments_from_eta_series,
    monotone_convolve,
    SeriesMap,
)

NUMERICAL_ERRORS = (
    ContinuationFailed,
    GapUnderflow,
    NotBoundaryRegular,
    OrderingViolated,
    SingularityError,
    ZeroMeanMeasure,
    InconclusiveTruncation,
    RuntimeError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def _write_json(path: Path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sidecar(path: Path, command: str, config: dict):
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    _write_json(
        Path(str(path) + ".meta.json"),
        {"command": command, "config_hash": digest, "tool_version": __version__},
    )


def parse_measure(spec: str) -> CircleMeasure:
    """Built-in measure specs: delta1 | uniform | two-atoms:<angle> | atoms:<file>."""
    if spec == "delta1":
        return CircleMeasure.point_mass(0.0)
    if spec == "uniform":
        return CircleMeasure.uniform()
    if spec.startswith("two-atoms:"):
        return CircleMeasure.two_atoms(float(spec.split(":", 1)[1]))
    if spec.startswith("atoms:"):
        path = spec.split(":", 1)[1]
        try:
            return CircleMeasure.from_json(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"measure file not found: {path}") from exc
    raise ConfigError(f"unknown measure spec {spec!r}")


def parse_generator(spec: str) -> GeneratorS:
    """Built-in generator specs: burgers | herglotz:<file>."""
    if spec == "burgers":
        return GeneratorS.burgers()
    if spec.startswith("herglotz:"):
        path = spec.split(":", 1)[1]
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"generator file not found: {path}") from exc
        rho = CircleMeasure.from_json_dict(d["rho"], require_probability=False)
        return GeneratorS.from_herglotz_data(float(d.get("alpha", 0.0)), rho)
    raise ConfigError(f"unknown generator spec {spec!r}")


def _merge_config(args, parser_defaults: dict) -> dict:
    """Merge a --config JSON file under explicit command-line flags."""
    merged = dict(parser_defaults)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(parser_defaults)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in parser_defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            merged[key] = val
    return merged


def _default_threads() -> int:
    env = os.environ.get("SLE_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SLE_LAB_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _parse_floats(text: str):
    return [float(v) for v in text.split(",") if v]


# -- subcommands ------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    defaults = {
        "n": 20, "kappa": 2.0, "weights": "equal", "init": "cluster:0:1e-3",
        "dt": 1e-3, "t-end": 1.0, "seed": 0, "runs": 1, "record": "1.0",
    }
    cfg = _merge_config(args, defaults)
    record = _parse_floats(cfg["record"]) if isinstance(cfg["record"], str) else cfg["record"]
    sim_cfg = SimulationConfig(
        n=int(cfg["n"]), kappa=float(cfg["kappa"]), weights=cfg["weights"],
        init=cfg["init"], dt=float(cfg["dt"]), t_end=float(cfg["t-end"]),
        seed=int(cfg["seed"]), n_runs=int(cfg["runs"]), record_times=record,
    )
    result = simulate(sim_cfg, store_path=False)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    measures = []
    for run in result.runs:
        for (state, mu, alpha) in run.records:
            for k in range(state.n):
                rows.append((run.run_index, state.t, k, state.theta[k], state.lam[k]))
            measures.append(
                {
                    "run": run.run_index,
                    "t": state.t,
                    "mu": mu.to_json_dict(),
                    "alpha": alpha.to_json_dict(),
                }
            )
    traj = out / "trajectory.csv"
    _write_csv(traj, ["run", "t", "k", "theta", "weight"], rows)
    _sidecar(traj, "simulate", cfg)
    meas = out / "measures.json"
    _write_json(meas, measures)
    _sidecar(meas, "simulate", cfg)
    print(
        f"simulate: n={sim_cfg.n} kappa={sim_cfg.kappa} runs={sim_cfg.n_runs} "
        f"-> {traj} ({len(rows)} rows)"
    )
    return 0


def _cmd_limit(args) -> int:
    defaults = {
        "m0": "delta1", "s": "burgers", "t": 1.0, "t-list": "", "grid": 64,
        "what": "field", "r-max": 0.9,
    }
    cfg = _merge_config(args, defaults)
    m0 = parse_measure(cfg["m0"])
    gen = parse_generator(cfg["s"])
    M0 = HerglotzField.from_measure(m0)
    ts = _parse_floats(cfg["t-list"]) or [float(cfg["t"])]
    G = int(cfg["grid"])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    if cfg["what"] == "field":
        radii = np.linspace(0.0, float(cfg["r-max"]), max(2, G // 8))
        angles = np.arange(G) * (2 * np.pi / G)
        z = (radii[:, None] * np.exp(1j * angles)).ravel()
        for t in ts:
            vals = characteristic_solve(M0, gen, t, z)
            rows.extend(
                (t, zz.real, zz.imag, vv.real, vv.imag) for zz, vv in zip(z, vals)
            )
        spot = complex(characteristic_solve(M0, gen, ts[-1], 0.0))
    elif cfg["what"] == "circles":
        angles = np.arange(G) * (2 * np.pi / G)
        for t in ts:
            for r in (0.5, 0.999):
                z = r * np.exp(1j * angles)
                f = z * np.exp(t * gen.eval(M0.eval(z)))
                rows.extend(
                    (t, zz.real, zz.imag, vv.real, vv.imag) for zz, vv in zip(z, f)
                )
        spot = complex(0.0)
    else:
        raise ConfigError(f"unknown --what {cfg['what']!r}")
    path = out / "field.csv"
    _write_csv(path, ["t", "re_z", "im_z", "re_M", "im_M"], rows)
    _sidecar(path, "limit", cfg)
    if cfg["what"] == "field":
        print(f"limit: wrote {path} ({len(rows)} rows), M(0)={spot.real:.12g} at t={ts[-1]}")
    else:
        print(f"limit: wrote {path} ({len(rows)} rows of circle images)")
    return 0


def _cmd_hull(args) -> int:
    defaults = {"m0": "delta1", "s": "burgers", "t-list": "0.5", "grid": 512}
    cfg = _merge_config(args, defaults)
    m0 = parse_measure(cfg["m0"])
    gen = parse_generator(cfg["s"])
    ts = _parse_floats(cfg["t-list"])
    path = LimitDrivingPath(m0, gen, max(ts))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for t in ts:
        verts, _kept = hull_boundary(path, t, boundary_grid=int(cfg["grid"]))
        rows.extend((t, i, v.real, v.imag) for i, v in enumerate(verts))
    fname = out / "hull.csv"
    _write_csv(fname, ["t", "vertex_index", "re", "im"], rows)
    _sidecar(fname, "hull", cfg)
    print(f"hull: wrote {fname} ({len(rows)} rows at {len(ts)} times)")
    return 0


def _cmd_curves(args) -> int:
    defaults = {
        "n": 20, "kappa": 2.0, "weights": "equal", "init": "cluster:0:1e-3",
        "dt": 1e-3, "t-end": 0.5, "seed": 0, "samples": 25,
    }
    cfg = _merge_config(args, defaults)
    t_end = float(cfg["t-end"])
    sim_cfg = SimulationConfig(
        n=int(cfg["n"]), kappa=float(cfg["kappa"]), weights=cfg["weights"],
        init=cfg["init"], dt=float(cfg["dt"]), t_end=t_end, seed=int(cfg["seed"]),
        n_runs=1, record_times=[t_end],
    )
    result = simulate(sim_cfg, store_path=True)
    sample_times = np.linspace(0.0, t_end, int(cfg["samples"]))
    fan = trace_curves(result.runs[0].path, sample_times)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (times, pts) in sorted(fan.items()):
        rows.extend((k, t, p.real, p.imag) for t, p in zip(times, pts))
    fname = out / "curves.csv"
    _write_csv(fname, ["curve_id", "t", "re", "im"], rows)
    _sidecar(fname, "curves", cfg)
    print(f"curves: wrote {fname} ({len(rows)} points, {sim_cfg.n} curves)")
    return 0


def _cmd_converge(args) -> int:
    defaults = {
        "n-list": "16,64,256", "kappa": 2.0, "init": "cluster:0:1e-3", "dt": 1e-3,
        "t-end": 0.5, "seed": 0, "runs": 8, "record": "0.25,0.5", "m0": "delta1",
    }
    cfg = _merge_config(args, defaults)
    record = _parse_floats(cfg["record"])
    n_values = [int(v) for v in str(cfg["n-list"]).split(",") if v]
    base = SimulationConfig(
        n=n_values[0], kappa=float(cfg["kappa"]), weights="equal", init=cfg["init"],
        dt=float(cfg["dt"]), t_end=float(cfg["t-end"]), seed=int(cfg["seed"]),
        n_runs=int(cfg["runs"]), record_times=record,
    )
    m0 = parse_measure(cfg["m0"])
    K = 256
    limit_measures = []
    limit_m1 = []
    for t in record:
        m = moment_hierarchy(m0.moments(K), t, K)
        limit_measures.append(CircleMeasure.from_moments(m.m, grid_size=4096))
        limit_m1.append(complex(m.m[1]))
    report = convergence_study(
        base, n_values, limit_measures, limit_m1=limit_m1, threads=args.threads
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fname = out / "convergence.json"
    _write_json(fname, report.to_json_dict())
    _sidecar(fname, "converge", cfg)
    print(
        f"converge: wrote {fname}; monotone in N: {report.monotone_in_n()}; "
        f"max W1 = {float(np.max(report.distances)):.4g}"
    )
    return 0


def _cmd_freeconv(args) -> int:
    defaults = {"a": "delta1", "b": "delta1", "op": "boxtimes", "order": 16}
    cfg = _merge_config(args, defaults)
    mu = parse_measure(cfg["a"])
    nu = parse_measure(cfg["b"])
    K = int(cfg["order"])
    if cfg["op"] == "boxtimes":
        m = free_mult_convolve(mu, nu, K)
    elif cfg["op"] == "monotone":
        m = monotone_convolve(mu, nu, K)
    else:
        raise ConfigError(f"unknown convolution op {cfg['op']!r}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fname = out / "freeconv.csv"
    _write_csv(
        fname, ["n", "re_m", "im_m"],
        [(n, m.m[n].real, m.m[n].imag) for n in range(len(m))],
    )
    _sidecar(fname, "freeconv", cfg)
    print(f"freeconv: {cfg['op']} to order {K} -> {fname}")
    return 0


def _cmd_support_time(args) -> int:
    defaults = {"m0": "delta1"}
    cfg = _merge_config(args, defaults)
    mu = parse_measure(cfg["m0"])
    res = support_time(mu)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fname = out / "support_time.json"
    payload = {"already_full": True} if res is ALREADY_FULL else res
    _write_json(fname, payload)
    _sidecar(fname, "support-time", cfg)
    if res is ALREADY_FULL:
        print("support-time: measure already has full support")
    else:
        print(f"support-time: T={res['T']:.9g} at x={res['argmin_x']:.6g} (m={res['m']:.9g})")
    return 0


def _cmd_moments(args) -> int:
    defaults = {"m0": "delta1", "s": "burgers", "t-list": "0.25,0.5,1.0", "order": 12}
    cfg = _merge_config(args, defaults)
    mu = parse_measure(cfg["m0"])
    gen = parse_generator(cfg["s"])
    K = int(cfg["order"])
    ts = _parse_floats(cfg["t-list"])
    eta0 = eta_series_from_moments(mu.moments(K).m, K)
    rows = []
    for t in ts:
        eta_t = coefficient_ode(eta0, gen.u_series(K), K, t)
        m = moments_from_eta_series(eta_t)
        rows.extend((t, n, m.m[n].real, m.m[n].imag) for n in range(K + 1))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fname = out / "moments.csv"
    _write_csv(fname, ["t", "n", "re_m", "im_m"], rows)
    _sidecar(fname, "moments", cfg)
    print(f"moments: orders 0..{K} at {len(ts)} times -> {fname}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "limit": _cmd_limit,
    "hull": _cmd_hull,
    "curves": _cmd_curves,
    "converge": _cmd_converge,
    "freeconv": _cmd_freeconv,
    "support-time": _cmd_support_time,
    "moments": _cmd_moments,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sle-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--config", default=None, help="JSON config merged under flags")
        p.add_argument("--threads", type=int, default=_default_threads())

    p = sub.add_parser("simulate", help="run the driving-angle SDE")
    add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--weights")
    p.add_argument("--init")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--record", help="comma-separated record times")

    p = sub.add_parser("limit", help="evaluate the deterministic limit field")
    add_common(p)
    p.add_argument("--m0")
    p.add_argument("--s")
    p.add_argument("--t", type=float)
    p.add_argument("--t-list", help="comma-separated times (overrides --t)")
    p.add_argument("--grid", type=int)
    p.add_argument("--what", choices=["field", "circles"])
    p.add_argument("--r-max", type=float)

    p = sub.add_parser("hull", help="trace limit hull boundaries")
    add_common(p)
    p.add_argument("--m0")
    p.add_argument("--s")
    p.add_argument("--t-list")
    p.add_argument("--grid", type=int)

    p = sub.add_parser("curves", help="simulate and trace the SLE curves")
    add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--weights")
    p.add_argument("--init")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("converge", help="particle-to-limit convergence study")
    add_common(p)
    p.add_argument("--n-list")
    p.add_argument("--kappa", type=float)
    p.add_argument("--init")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--record")
    p.add_argument("--m0")

    p = sub.add_parser("freeconv", help="free or monotone multiplicative convolution")
    add_common(p)
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--op", choices=["boxtimes", "monotone"])
    p.add_argument("--order", type=int)

    p = sub.add_parser("support-time", help="first full-support time of the limit")
    add_common(p)
    p.add_argument("--m0")

    p = sub.add_parser("moments", help="moment tables of the evolved measure")
    add_common(p)
    p.add_argument("--m0")
    p.add_argument("--s")
    p.add_argument("--t-list")
    p.add_argument("--order", type=int)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, SchemaError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
