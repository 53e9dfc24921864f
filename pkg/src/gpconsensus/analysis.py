"""Lyapunov bookkeeping, performance cost, convergence coefficient, theorem checks.

The Lyapunov function evaluated here is

    V = |mu|^2 + sum_{edges, ordered} (w - w0)^2 / 2 + (1/2M) sum_{all pairs, ordered} (w_m - w)

with the weight-deviation term restricted to graph edges.  With that
restriction its derivative along the adaptive flow is exactly
-alpha * sum_k (2 lambda_k + 1) mu_k^2, which is what the central-difference
and telescoping checks verify.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .decomposition import SpectralFrame, build_frame, disagreement
from .dynamics import Trajectory
from .graph import laplacian

RHO_FLOOR = 1e-12
RATE_TOL = 1e-6
COST_RTOL = 1e-4
PLATEAU_TOL = 1e-8
DEFAULT_EPS = 1e-3
SMOOTH_CURVATURE = 30.0
NOT_REACHED = "not reached"


class NotConvergedError(RuntimeError):
    """An accumulator has not plateaued; the horizon is too short."""


# ---------------------------------------------------------------------------
# Lyapunov function and its rate
# ---------------------------------------------------------------------------


def lyapunov(f: SpectralFrame, s, w0, w_hat_m, edge_mask) -> float:
    """V at one SystemState.  ``edge_mask`` selects graph edges among all pairs."""
    w = np.asarray(s.w, dtype=float)
    w_hat_m = np.asarray(w_hat_m, dtype=float)
    if np.any(w_hat_m < w):
        bad = int(np.argmax(w - w_hat_m))
        raise ValueError(
            f"weight bound estimate below current weight at pair {bad}: {w_hat_m[bad]!r} < {w[bad]!r}"
        )
    return float(lyapunov_series(f, s.x[None, :], w[None, :], w0, w_hat_m, edge_mask)[0])


def lyapunov_series(f: SpectralFrame, x, w, w0, w_hat_m, edge_mask) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    edge_mask = np.asarray(edge_mask, dtype=bool)
    w0 = np.broadcast_to(np.asarray(w0, dtype=float), w.shape[1:])
    mu = disagreement(f, x)
    energy = np.sum(mu * mu, axis=1)
    dev = (w - w0)[:, edge_mask]
    # ordered-pair sums are twice the unordered ones
    deviation = np.sum(dev * dev, axis=1)
    slack = np.sum(np.asarray(w_hat_m) - w, axis=1) / f.m
    return energy + deviation + slack


def lyapunov_rate_analytic(f: SpectralFrame, mu, alpha: float):
    """-alpha sum_k (2 lambda_k + 1) mu_k^2; accepts one mu or a (T, M-1) stack."""
    mu = np.asarray(mu, dtype=float)
    return -alpha * np.sum((2.0 * f.omega0 + 1.0) * mu * mu, axis=-1)


def standard_rate(f: SpectralFrame, mu, alpha: float):
    """d|mu|^2/dt = -2 alpha mu^T Omega mu under the fixed-weight protocol."""
    mu = np.asarray(mu, dtype=float)
    return -2.0 * alpha * np.sum(f.omega0 * mu * mu, axis=-1)


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------


def _nearest_index(traj: Trajectory, t: float) -> int:
    if t > traj.horizon + 0.5 * traj.h * traj.stride:
        raise ValueError(f"H = {t} beyond trajectory horizon {traj.horizon}")
    if t < 0:
        raise ValueError(f"H must be nonnegative, got {t}")
    return int(np.argmin(np.abs(traj.times - t)))


def performance_cost(traj: Trajectory, up_to: float) -> float:
    """J_r^H read from the cost accumulator at the sample nearest H."""
    return float(traj.cost_acc[_nearest_index(traj, up_to)])


def _last_decile_increase(traj: Trajectory, series: np.ndarray) -> np.ndarray:
    times = traj.times
    start = int(np.searchsorted(times, 0.9 * times[-1]))
    start = min(start, len(times) - 1)
    return series[-1] - series[start]


def accumulator_plateaued(traj: Trajectory) -> bool:
    acc = traj.disagreement_acc
    return bool(_last_decile_increase(traj, acc) <= PLATEAU_TOL * abs(acc[-1]))


def weights_plateaued(traj: Trajectory) -> bool:
    inc = _last_decile_increase(traj, traj.w)
    return bool(np.all(inc < PLATEAU_TOL))


def guaranteed_cost(x0, traj: Trajectory, alpha: float) -> float:
    """J_r* = |mu(0)|^2 + alpha * integral of |mu|^2 over the run."""
    x0 = np.asarray(x0, dtype=float)
    if not accumulator_plateaued(traj):
        inc = float(_last_decile_increase(traj, traj.disagreement_acc))
        raise NotConvergedError(
            "disagreement integral has not converged "
            f"(last-decile increase {inc:.3e} of {traj.disagreement_acc[-1]:.6g}); use a longer horizon"
        )
    c = x0 - x0.mean()
    return float(c @ c + alpha * traj.disagreement_acc[-1])


# ---------------------------------------------------------------------------
# Convergence coefficient and time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoSeries:
    times: np.ndarray
    rho: np.ndarray  # nan where skipped
    evaluated: np.ndarray
    skipped: int

    @property
    def minimum(self) -> float:
        vals = self.rho[self.evaluated]
        return float(vals.min()) if vals.size else math.nan


def rho_bounds(alpha: float, lambda2: float) -> tuple[float, float]:
    """(rho_min for the standard protocol, rho_min for the adaptive protocol)."""
    return 2.0 * alpha * lambda2, alpha * (2.0 * lambda2 + 1.0)


def convergence_coefficient(traj: Trajectory, f: SpectralFrame, cfg=None, w_hat_m=None, floor: float = RHO_FLOOR) -> RhoSeries:
    """rho(t) = -V_dot / |mu|^2 at every sample with |mu|^2 > floor.

    ``w_hat_m`` does not enter rho (the slack term's derivative is
    bound-independent); it is accepted for interface symmetry.
    """
    cfg = cfg or traj.config
    mu = disagreement(f, traj.x)
    energy = np.sum(mu * mu, axis=1)
    if cfg.adaptive:
        vdot = lyapunov_rate_analytic(f, mu, cfg.alpha)
    else:
        vdot = standard_rate(f, mu, cfg.alpha)
    evaluated = energy > floor
    rho = np.full(len(energy), np.nan)
    rho[evaluated] = -vdot[evaluated] / energy[evaluated]
    return RhoSeries(traj.times, rho, evaluated, int(np.sum(~evaluated)))


def convergence_time(traj: Trajectory, eps: float = DEFAULT_EPS) -> Optional[float]:
    """First sampled t after which max_{k,j}|x_k - x_j| stays below eps; None if never."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    below = traj.max_gap() < eps
    if not below[-1]:
        return None
    above = np.flatnonzero(~below)
    first = 0 if above.size == 0 else int(above[-1]) + 1
    return float(traj.times[first])


# ---------------------------------------------------------------------------
# Numerical cross-checks
# ---------------------------------------------------------------------------


def central_difference(times, values) -> np.ndarray:
    """Second-order central difference on interior samples (nan at the ends)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    out[1:-1] = (values[2:] - values[:-2]) / (times[2:] - times[:-2])
    return out


@dataclass(frozen=True)
class VdotCheck:
    max_rel_error: float
    tolerance: float
    n_used: int
    spacing: float

    @property
    def passed(self) -> bool:
        return self.n_used > 0 and self.max_rel_error < self.tolerance


def vdot_consistency(times, v, vdot, max_curvature: float = SMOOTH_CURVATURE, rel_floor: float = 1e-6) -> VdotCheck:
    """Compare central-difference dV/dt against the analytic rate.

    Smooth segments are interior samples where the analytic rate's own
    curvature |V_dot''| / |V_dot| is at most ``max_curvature`` and |V_dot| is
    above ``rel_floor`` times its peak.  Tolerance is 10 * spacing^2.
    """
    times = np.asarray(times, dtype=float)
    vdot = np.asarray(vdot, dtype=float)
    spacing = float(np.min(np.diff(times)))
    fd = central_difference(times, v)
    curv = np.full(vdot.shape, np.nan)
    dt2 = (times[2:] - times[:-2]) / 2.0
    curv[1:-1] = (vdot[2:] - 2.0 * vdot[1:-1] + vdot[:-2]) / (dt2 * dt2)
    peak = float(np.max(np.abs(vdot))) if vdot.size else 0.0
    big = np.abs(vdot) > rel_floor * peak
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(curv) / np.abs(vdot)
        rel = np.abs(fd - vdot) / np.abs(vdot)
    use = big & np.isfinite(ratio) & (ratio <= max_curvature) & np.isfinite(rel)
    max_rel = float(np.max(rel[use])) if np.any(use) else math.nan
    return VdotCheck(max_rel, 10.0 * spacing * spacing, int(np.sum(use)), spacing)


def telescoping_residual(traj: Trajectory, v_series: np.ndarray) -> float:
    """|V(0) - V(H) + integral_0^H V_dot dt| for an adaptive run.

    The integral of the analytic rate is accumulated inside the ODE state:
    the edge weights carry alpha * int (x_j - x_k)^2 and the disagreement
    accumulator carries int |mu|^2.
    """
    if not traj.config.adaptive:
        raise ValueError("telescoping check applies to adaptive runs")
    mask = traj.topology.edge_mask()
    edge_integral = np.sum(traj.w[-1, mask] - traj.w[0, mask])
    int_vdot = -(2.0 * edge_integral + traj.config.alpha * traj.disagreement_acc[-1])
    return float(abs(v_series[0] - v_series[-1] + int_vdot))


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class AnalysisReport:
    lambda2: float
    rho_min_standard: float
    rho_min_adaptive: float
    jr_h_final: float
    jr_star: Optional[float]
    consensus_time: object
    theorem1_holds: bool
    theorem2_holds: bool
    v_series: list = field(repr=False)
    v_dot_series: list = field(repr=False)
    rho_series: list = field(repr=False)
    t_series: list = field(repr=False)
    mode: str = "adaptive"
    alpha: float = 0.0
    zeta: float = 0.0
    gain_condition: bool = False
    rho_min_observed: Optional[float] = None
    rho_skipped: int = 0
    cost_margin: Optional[float] = None
    consensus_value: float = 0.0
    mean_drift: float = 0.0
    final_max_gap: float = 0.0
    weights_plateaued: bool = False
    vdot_fd_max_rel_error: Optional[float] = None
    vdot_fd_tolerance: Optional[float] = None
    telescoping_residual: Optional[float] = None

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, list):
                out[k] = [clean(float(e)) for e in v]
            elif isinstance(v, (np.floating, float)):
                out[k] = clean(float(v))
            elif isinstance(v, (np.bool_, bool)):
                out[k] = bool(v)
            elif isinstance(v, np.integer):
                out[k] = int(v)
            else:
                out[k] = v
        return out


def frame_for(traj: Trajectory) -> SpectralFrame:
    return build_frame(laplacian(traj.topology, traj.w0))


def check_theorems(traj: Trajectory, frame: SpectralFrame | None = None, eps: float = DEFAULT_EPS, floor: float = RHO_FLOOR) -> AnalysisReport:
    """Evaluate both theorem claims on a finished trajectory."""
    f = frame or frame_for(traj)
    cfg = traj.config
    lam2 = f.lambda2
    rho1, rho2 = rho_bounds(cfg.alpha, lam2)
    mu = disagreement(f, traj.x)
    w_hat_m = traj.w[-1]
    if cfg.adaptive:
        v = lyapunov_series(f, traj.x, traj.w, traj.w0, w_hat_m, traj.topology.edge_mask())
        vdot = lyapunov_rate_analytic(f, mu, cfg.alpha)
        tele = telescoping_residual(traj, v)
    else:
        v = np.sum(mu * mu, axis=1)
        vdot = standard_rate(f, mu, cfg.alpha)
        tele = None
    rho = convergence_coefficient(traj, f, cfg, w_hat_m, floor)
    fd = vdot_consistency(traj.times, v, vdot) if len(traj) >= 3 else None

    jr_h = float(traj.cost_acc[-1])
    try:
        jr_star = guaranteed_cost(traj.x0, traj, cfg.alpha)
    except NotConvergedError:
        jr_star = None
    cost_ok = jr_star is not None and jr_h <= jr_star + COST_RTOL * max(abs(jr_star), 1e-300)
    rho_min = rho.minimum
    theorem2 = bool(rho.evaluated.any() and rho_min >= rho2 - RATE_TOL) or not rho.evaluated.any()

    means = traj.x.mean(axis=1)
    ct = convergence_time(traj, eps)
    return AnalysisReport(
        lambda2=lam2,
        rho_min_standard=rho1,
        rho_min_adaptive=rho2,
        jr_h_final=jr_h,
        jr_star=jr_star,
        consensus_time=NOT_REACHED if ct is None else ct,
        theorem1_holds=bool(cfg.gain_condition and cost_ok),
        theorem2_holds=theorem2,
        v_series=list(v),
        v_dot_series=list(vdot),
        rho_series=list(rho.rho),
        t_series=list(traj.times),
        mode=cfg.mode,
        alpha=cfg.alpha,
        zeta=cfg.zeta,
        gain_condition=cfg.gain_condition,
        rho_min_observed=rho_min if math.isfinite(rho_min) else None,
        rho_skipped=rho.skipped,
        cost_margin=None if jr_star is None else jr_star - jr_h,
        consensus_value=float(means[0]),
        mean_drift=float(np.max(np.abs(means - means[0]))),
        final_max_gap=float(traj.max_gap()[-1]),
        weights_plateaued=weights_plateaued(traj),
        vdot_fd_max_rel_error=None if fd is None or fd.n_used == 0 else fd.max_rel_error,
        vdot_fd_tolerance=None if fd is None else fd.tolerance,
        telescoping_residual=tele,
    )
