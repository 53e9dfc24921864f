"""Adaptive and standard consensus protocols, RK4 integration, trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from .graph import Topology, algebraic_connectivity, laplacian

ADAPTIVE = "adaptive"
STANDARD = "standard"
MODES = (ADAPTIVE, STANDARD)

DEFAULT_STEP = 1e-3
DEFAULT_STRIDE = 10
HORIZON_TIME_CONSTANTS = 20.0


class IntegrationError(RuntimeError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: float
    zeta: float
    mode: str = ADAPTIVE

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a positive finite number, got {self.alpha!r}")
        if not (self.zeta > 0 and math.isfinite(self.zeta)):
            raise ValueError(f"zeta must be a positive finite number, got {self.zeta!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def adaptive(self) -> bool:
        return self.mode == ADAPTIVE

    @property
    def gain_condition(self) -> bool:
        """Whether alpha >= 2 zeta (recorded, never enforced)."""
        return self.alpha >= 2.0 * self.zeta


@dataclass(frozen=True)
class SystemState:
    time: float
    x: np.ndarray
    w: np.ndarray  # one entry per unordered pair, Topology.all_pairs() order
    cost_acc: float = 0.0
    disagreement_acc: float = 0.0

    def pack(self) -> np.ndarray:
        return np.concatenate([self.x, self.w, [self.cost_acc, self.disagreement_acc]])

    @classmethod
    def unpack(cls, time, y, m) -> "SystemState":
        npair = m * (m - 1) // 2
        return cls(float(time), y[:m].copy(), y[m : m + npair].copy(), float(y[m + npair]), float(y[m + npair + 1]))


@dataclass(frozen=True)
class Trajectory:
    """Samples of the augmented state on a uniform grid of internal steps."""

    topology: Topology
    config: ProtocolConfig
    h: float
    stride: int
    steps: np.ndarray
    x: np.ndarray
    w: np.ndarray
    cost_acc: np.ndarray
    disagreement_acc: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.h

    @property
    def horizon(self) -> float:
        return float(self.steps[-1] * self.h)

    @property
    def x0(self) -> np.ndarray:
        return self.x[0]

    @property
    def w0(self) -> np.ndarray:
        return self.w[0]

    def __len__(self) -> int:
        return len(self.steps)

    def state(self, i: int) -> SystemState:
        return SystemState(
            float(self.steps[i] * self.h),
            self.x[i].copy(),
            self.w[i].copy(),
            float(self.cost_acc[i]),
            float(self.disagreement_acc[i]),
        )

    @property
    def samples(self) -> Iterator[SystemState]:
        return (self.state(i) for i in range(len(self)))

    @property
    def final(self) -> SystemState:
        return self.state(len(self) - 1)

    def max_gap(self) -> np.ndarray:
        """max_{k,j} |x_k - x_j| per sample."""
        return self.x.max(axis=1) - self.x.min(axis=1)

    def edge_weights(self) -> np.ndarray:
        return self.w[:, self.topology.edge_mask()]


def _as_state_vector(t: Topology, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (t.node_count,):
        raise ValueError(f"state has shape {x.shape}, topology has {t.node_count} nodes")
    return x


def control_input(t: Topology, x, w, cfg: ProtocolConfig, w0=1.0) -> np.ndarray:
    """u = -alpha L_w x (adaptive) or -alpha L_{w(0)} x (standard)."""
    x = _as_state_vector(t, x)
    weights = w if cfg.adaptive else w0
    return -cfg.alpha * (laplacian(t, weights) @ x)


def weight_rate(t: Topology, x, cfg: ProtocolConfig) -> np.ndarray:
    """alpha (x_j - x_k)^2 for every unordered pair; zero in standard mode."""
    x = _as_state_vector(t, x)
    pi, pj, _ = t.pair_arrays()
    if not cfg.adaptive:
        return np.zeros(len(pi))
    d = x[pj] - x[pi]
    return cfg.alpha * d * d


def initial_state(t: Topology, x0, w0=1.0) -> SystemState:
    x0 = _as_state_vector(t, x0)
    npair = t.node_count * (t.node_count - 1) // 2
    w = np.full(npair, float(w0)) if np.isscalar(w0) else np.asarray(w0, dtype=float).copy()
    if w.shape != (npair,):
        raise ValueError(f"expected {npair} pair weights, got shape {w.shape}")
    return SystemState(0.0, x0.copy(), w)


def rk4_step(state: SystemState, h: float, t: Topology, cfg: ProtocolConfig) -> SystemState:
    """One classical RK4 step of the augmented (x, w, cost, disagreement) system."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    pi, pj, beta = t.pair_arrays()
    m = t.node_count
    args = (pi, pj, beta, m, cfg.alpha, cfg.zeta, cfg.adaptive)
    y = state.pack()
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = kernels.field_numpy(y, *args)
        k2 = kernels.field_numpy(y + 0.5 * h * k1, *args)
        k3 = kernels.field_numpy(y + 0.5 * h * k2, *args)
        k4 = kernels.field_numpy(y + h * k3, *args)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite state at t = {state.time + h:.6g}", state.time + h)
    return SystemState.unpack(state.time + h, y, m)


def default_horizon(t: Topology, alpha: float, h: float = DEFAULT_STEP, stride: int = DEFAULT_STRIDE) -> float:
    """20 guaranteed disagreement time constants 1/(alpha lambda_2), on the sample grid."""
    lam2 = algebraic_connectivity(t)
    raw = HORIZON_TIME_CONSTANTS / (alpha * lam2)
    block = h * stride
    return math.ceil(raw / block - 1e-9) * block


def n_steps_for(horizon: float, h: float) -> int:
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    return max(1, math.ceil(horizon / h - 1e-9))


def simulate(
    t: Topology,
    x0,
    cfg: ProtocolConfig,
    horizon: float | None = None,
    h: float = DEFAULT_STEP,
    stride: int = DEFAULT_STRIDE,
    w0=1.0,
) -> Trajectory:
    """Integrate from x0 with unit initial weights and zero accumulators.

    ``horizon`` defaults to ``default_horizon``.  Samples are taken every
    ``stride`` internal steps plus the final step; if ``horizon`` is not a
    multiple of ``h`` the last step overshoots to the next grid point.
    """
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    stride = int(stride)
    if horizon is None:
        horizon = default_horizon(t, cfg.alpha, h, stride)
    n_steps = n_steps_for(horizon, h)
    s0 = initial_state(t, x0, w0)
    pi, pj, beta = t.pair_arrays()
    m = t.node_count
    samples, steps, fail = kernels.rk4_kernel(
        s0.pack(), float(h), n_steps, stride, pi, pj, beta, m, float(cfg.alpha), float(cfg.zeta), cfg.adaptive
    )
    if fail >= 0:
        raise IntegrationError(
            f"integration diverged: non-finite state at t = {fail * h:.6g} (step {fail})", fail * h
        )
    npair = len(pi)
    return Trajectory(
        topology=t,
        config=cfg,
        h=float(h),
        stride=stride,
        steps=np.asarray(steps, dtype=np.int64),
        x=samples[:, :m].copy(),
        w=samples[:, m : m + npair].copy(),
        cost_acc=samples[:, m + npair].copy(),
        disagreement_acc=samples[:, m + npair + 1].copy(),
    )
