"""Command-line front end.

Subcommands: simulate, compare, sweep, cost, topology-info.
Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis, io
from .analysis import NotConvergedError
from .decomposition import build_frame
from .dynamics import (
    ADAPTIVE,
    DEFAULT_STEP,
    DEFAULT_STRIDE,
    MODES,
    STANDARD,
    IntegrationError,
    ProtocolConfig,
    default_horizon,
    simulate,
)
from .graph import (
    BUILTIN_EDGES,
    ConvergenceError,
    Topology,
    TopologyError,
    laplacian,
    resolve_topology,
    symmetric_eigendecomposition,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

DEFAULT_X0 = (1.0, 6.0, 8.0, 13.0, 15.0, 19.0)
DEFAULT_ALPHAS = (0.5, 1.0, 2.0, 4.0, 8.0)
DEFAULT_COST_H = 3.0
MIN_SWEEP_POINTS = 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    topology: str = "paper6"
    x0: list | None = None
    alpha: float = 2.0
    zeta: float = 1.0
    mode: str = ADAPTIVE
    step: float = DEFAULT_STEP
    horizon: float | None = None
    stride: int = DEFAULT_STRIDE
    eps: float = analysis.DEFAULT_EPS
    out: str = "out"
    all_pairs: bool = False
    validate: bool = False
    # sweep / cost extras
    alphas: list = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    zeta_ratio: float | None = None
    jobs: int = 1
    cost_h: float = DEFAULT_COST_H
    parameter_source: dict = field(default_factory=dict, repr=False)

    def resolve(self) -> tuple[Topology, np.ndarray]:
        """Load the topology, fill x0 and check every field."""
        t = resolve_topology(self.topology)
        if self.x0 is None:
            # reference initial state, cycled or truncated to M
            x0 = np.resize(np.array(DEFAULT_X0), t.node_count)
        else:
            x0 = np.asarray(self.x0, dtype=float)
            if x0.ndim != 1 or len(x0) != t.node_count:
                raise ConfigError(f"x0: length {x0.size} does not match topology {t.name!r} with M = {t.node_count}")
        if not np.all(np.isfinite(x0)):
            raise ConfigError("x0: values must be finite")
        for name in ("alpha", "zeta", "step", "eps"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name}: must be a positive number, got {v!r}")
        if self.horizon is not None and not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon: must be a positive number, got {self.horizon!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigError(f"stride: must be a positive integer, got {self.stride!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.zeta_ratio is not None and not self.zeta_ratio > 0:
            raise ConfigError(f"zeta_ratio: must be positive, got {self.zeta_ratio!r}")
        if int(self.jobs) != self.jobs or self.jobs < 1:
            raise ConfigError(f"jobs: must be a positive integer, got {self.jobs!r}")
        return t, x0

    def protocol(self, alpha=None, mode=None) -> ProtocolConfig:
        alpha = self.alpha if alpha is None else alpha
        zeta = self.zeta if self.zeta_ratio is None else self.zeta_ratio * alpha
        return ProtocolConfig(float(alpha), float(zeta), mode or self.mode)

    def horizon_for(self, t: Topology, alpha: float) -> float:
        if self.horizon is not None:
            return float(self.horizon)
        return default_horizon(t, alpha, self.step, int(self.stride))

    def snapshot(self, t: Topology, x0, horizon=None) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "parameter_source"}
        d["x0"] = [float(v) for v in x0]
        d["node_count"] = t.node_count
        d["edges"] = [list(e) for e in t.edges]
        if horizon is not None:
            d["horizon_used"] = horizon
        return d


CONFIG_FIELDS = tuple(f.name for f in fields(ExperimentConfig) if f.name != "parameter_source")


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(data) - set(CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
    return data


def build_config(file_values: dict, flag_values: dict) -> ExperimentConfig:
    """defaults < config file < flags; records where each value came from."""
    cfg = ExperimentConfig()
    source = {name: "default" for name in CONFIG_FIELDS}
    for layer, label in ((file_values, "config"), (flag_values, "flag")):
        for k, v in layer.items():
            if v is None:
                continue
            setattr(cfg, k, v)
            source[k] = label
    cfg.parameter_source = source
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_traj(cfg, traj, path, written):
    header, cols = io.trajectory_columns(traj, cfg.all_pairs)
    io.write_csv(path, header, cols)
    written.append((path, cols, False))


def _validate_written(written):
    for path, cols, allow_nan in written:
        io.validate_csv(path, cols, allow_nan=allow_nan)


def _series_csv(path, report, written):
    cols = [report.t_series, report.v_series, report.v_dot_series, report.rho_series]
    io.write_csv(path, ["t", "V", "V_dot", "rho"], cols)
    # rho is nan where |mu|^2 fell below the floor
    written.append((path, cols, True))


def cmd_simulate(cfg: ExperimentConfig) -> dict:
    t, x0 = cfg.resolve()
    horizon = cfg.horizon_for(t, cfg.alpha)
    traj = simulate(t, x0, cfg.protocol(), horizon, cfg.step, int(cfg.stride))
    report = analysis.check_theorems(traj, eps=cfg.eps)
    out = _out_dir(cfg)
    written = []
    _write_traj(cfg, traj, out / "trajectory.csv", written)
    _series_csv(out / "series.csv", report, written)
    doc = report.to_dict()
    doc["config"] = cfg.snapshot(t, x0, horizon)
    doc["parameter_source"] = cfg.parameter_source
    io.write_json(out / "report.json", doc)
    if cfg.validate:
        _validate_written(written)
    return doc


def cmd_compare(cfg: ExperimentConfig) -> dict:
    t, x0 = cfg.resolve()
    horizon = cfg.horizon_for(t, cfg.alpha)
    out = _out_dir(cfg)
    written = []
    runs = {}
    for mode in (ADAPTIVE, STANDARD):
        traj = simulate(t, x0, cfg.protocol(mode=mode), horizon, cfg.step, int(cfg.stride))
        rep = analysis.check_theorems(traj, eps=cfg.eps)
        _write_traj(cfg, traj, out / f"trajectory_{mode}.csv", written)
        runs[mode] = {
            "consensus_time": rep.consensus_time,
            "rho_min_observed": rep.rho_min_observed,
            "rho_skipped": rep.rho_skipped,
            "jr_h_final": rep.jr_h_final,
            "consensus_value": rep.consensus_value,
            "mean_drift": rep.mean_drift,
            "final_max_gap": rep.final_max_gap,
        }
    lam2 = build_frame(laplacian(t)).lambda2
    rho1, rho2 = analysis.rho_bounds(cfg.alpha, lam2)
    ta, ts = runs[ADAPTIVE]["consensus_time"], runs[STANDARD]["consensus_time"]
    doc = {
        "lambda2": lam2,
        "alpha": cfg.alpha,
        "rho_min_standard": rho1,
        "rho_min_adaptive": rho2,
        "rho_ratio": rho2 / rho1,
        "adaptive": runs[ADAPTIVE],
        "standard": runs[STANDARD],
        "adaptive_faster": isinstance(ta, float) and (not isinstance(ts, float) or ta < ts),
        "config": cfg.snapshot(t, x0, horizon),
        "parameter_source": cfg.parameter_source,
    }
    io.write_json(out / "comparison.json", doc)
    if cfg.validate:
        _validate_written(written)
    return doc


def _sweep_member(args):
    t, x0, pc, horizon, step, stride, eps = args
    traj = simulate(t, x0, pc, horizon, step, stride)
    return analysis.convergence_time(traj, eps)


def linear_fit(x, y) -> dict:
    """Least-squares y = slope x + intercept with R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r_squared": r2}


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    t, x0 = cfg.resolve()
    alphas = [float(a) for a in cfg.alphas]
    if len(alphas) < MIN_SWEEP_POINTS:
        raise ConfigError(f"alphas: need at least {MIN_SWEEP_POINTS} values for a fit, got {len(alphas)}")
    if any(not (math.isfinite(a) and a > 0) for a in alphas):
        raise ConfigError("alphas: values must be positive")
    if len(set(alphas)) != len(alphas):
        raise ConfigError("alphas: values must be distinct")
    alphas.sort()
    tasks = [
        (t, x0, cfg.protocol(alpha=a), cfg.horizon_for(t, a), cfg.step, int(cfg.stride), cfg.eps) for a in alphas
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=int(cfg.jobs)) as pool:
            times = list(pool.map(_sweep_member, tasks))
    else:
        times = [_sweep_member(task) for task in tasks]
    missing = [a for a, ct in zip(alphas, times) if ct is None]
    if missing:
        raise NotConvergedError(f"consensus (eps = {cfg.eps}) not reached for alpha = {missing}; use a longer horizon")
    inv = [1.0 / a for a in alphas]
    out = _out_dir(cfg)
    cols = [alphas, inv, times]
    io.write_csv(out / "sweep.csv", ["alpha", "inv_alpha", "convergence_time"], cols)
    fit = linear_fit(inv, times)
    doc = {
        **fit,
        "n": len(alphas),
        "alphas": alphas,
        "convergence_times": times,
        "eps": cfg.eps,
        "mode": cfg.mode,
        "config": cfg.snapshot(t, x0),
        "parameter_source": cfg.parameter_source,
    }
    io.write_json(out / "fit.json", doc)
    if cfg.validate:
        io.validate_csv(out / "sweep.csv", cols)
    return doc


def cmd_cost(cfg: ExperimentConfig) -> dict:
    t, x0 = cfg.resolve()
    horizon = cfg.horizon_for(t, cfg.alpha)
    if not cfg.cost_h > 0:
        raise ConfigError(f"cost_h: must be positive, got {cfg.cost_h!r}")
    if cfg.cost_h > horizon:
        raise ConfigError(f"cost_h: H = {cfg.cost_h} exceeds horizon {horizon}")
    pc = cfg.protocol()
    traj = simulate(t, x0, pc, horizon, cfg.step, int(cfg.stride))
    jr_star = analysis.guaranteed_cost(x0, traj, pc.alpha)
    k = int(np.argmin(np.abs(traj.times - cfg.cost_h)))
    jr_h = float(traj.cost_acc[k])
    holds = jr_h < jr_star or (jr_h == 0.0 and jr_star == 0.0)
    out = _out_dir(cfg)
    cols = [traj.times[: k + 1], traj.cost_acc[: k + 1]]
    io.write_csv(out / "cost_trace.csv", ["t", "J_r^H"], cols)
    doc = {
        "H": float(traj.times[k]),
        "jr_h": jr_h,
        "jr_h_final": float(traj.cost_acc[-1]),
        "jr_star": jr_star,
        "margin": jr_star - jr_h,
        "bound_holds": bool(holds),
        "gain_condition": pc.gain_condition,
        "config": cfg.snapshot(t, x0, horizon),
        "parameter_source": cfg.parameter_source,
    }
    io.write_json(out / "cost.json", doc)
    if not holds:
        print(f"warning: J_r^H = {jr_h:.6g} is not below J_r* = {jr_star:.6g}", file=sys.stderr)
    if cfg.validate:
        io.validate_csv(out / "cost_trace.csv", cols)
    return doc


def cmd_topology_info(cfg: ExperimentConfig) -> dict:
    t = resolve_topology(cfg.topology)
    spec = symmetric_eigendecomposition(laplacian(t))
    return {
        "name": t.name,
        "node_count": t.node_count,
        "edges": [list(e) for e in t.edges],
        "laplacian_eigenvalues": [float(v) for v in spec.eigenvalues],
        "lambda2": float(spec.eigenvalues[1]) if t.node_count > 1 else None,
        "builtins": sorted(BUILTIN_EDGES),
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "cost": cmd_cost,
    "topology-info": cmd_topology_info,
}


# ---------------------------------------------------------------------------
# argparse plumbing
# ---------------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--topology", help=f"builtin name ({', '.join(BUILTIN_EDGES)}) or edge-list path")
    common.add_argument("--x0", type=_float_list, help="initial states, comma-separated")
    common.add_argument("--alpha", type=float, help="adaptive control gain")
    common.add_argument("--zeta", type=float, help="performance coefficient")
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--step", type=float, help="RK4 step h")
    common.add_argument("--horizon", type=float, help="simulated time; default 20/(alpha lambda_2)")
    common.add_argument("--stride", type=int, help="internal steps per output sample")
    common.add_argument("--eps", type=float, help="consensus threshold on max |x_k - x_j|")
    common.add_argument("--out", help="output directory")
    common.add_argument("--all-pairs", dest="all_pairs", action="store_const", const=True, help="export every pair weight")
    common.add_argument("--validate", action="store_const", const=True, help="re-read written CSVs and check round-trip")

    parser = argparse.ArgumentParser(prog="gpconsensus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one protocol and analyse it")
    sub.add_parser("compare", parents=[common], help="adaptive vs standard at equal alpha")
    sw = sub.add_parser("sweep", parents=[common], help="convergence time against 1/alpha")
    sw.add_argument("--alphas", type=_float_list, help="comma-separated gains (at least 4)")
    sw.add_argument("--zeta-ratio", dest="zeta_ratio", type=float, help="set zeta = ratio * alpha per run")
    sw.add_argument("--jobs", type=int, help="parallel worker processes")
    co = sub.add_parser("cost", parents=[common], help="J_r^H trace and guaranteed cost")
    co.add_argument("--H", dest="cost_h", type=float, help="cost horizon H (default 3)")
    sub.add_parser("topology-info", parents=[common], help="print topology and Laplacian spectrum")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k in CONFIG_FIELDS}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, flags)
        doc = COMMANDS[args.command](cfg)
    except (IntegrationError, NotConvergedError, ConvergenceError, io.CSVFormatError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "topology-info":
        sys.stdout.write(io.dumps(doc))
    else:
        summary = {k: doc[k] for k in doc if not isinstance(doc[k], (list, dict))}
        sys.stdout.write(io.dumps(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
