"""Consensus/disagreement split of the state space.

The frame Q = [1/sqrt(M) | Q_tilde] diagonalizes the initial Laplacian and
stays fixed for a whole run; mu(t) = Q_tilde^T x(t) is the disagreement
vector even while the weights drift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import ZERO_EIG_TOL, TopologyError, symmetric_eigendecomposition

LAPLACIAN_TOL = 1e-9


@dataclass(frozen=True)
class SpectralFrame:
    m: int
    q: np.ndarray
    q_tilde: np.ndarray
    omega0: np.ndarray

    @property
    def lambda2(self) -> float:
        return float(self.omega0[0])


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    vecs = vecs.copy()
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def build_frame(l0) -> SpectralFrame:
    """Orthogonal frame of the initial Laplacian ``l0``."""
    l0 = np.asarray(l0, dtype=float)
    m = l0.shape[0]
    if l0.shape != (m, m) or m < 2:
        raise ValueError(f"expected an MxM Laplacian with M >= 2, got shape {l0.shape}")
    scale = max(1.0, float(np.max(np.abs(l0))))
    if np.max(np.abs(l0 - l0.T)) > LAPLACIAN_TOL * scale:
        raise ValueError("initial Laplacian is not symmetric")
    if np.max(np.abs(l0.sum(axis=1))) > LAPLACIAN_TOL * scale:
        raise ValueError("initial Laplacian rows do not sum to zero")
    if np.any(l0[~np.eye(m, dtype=bool)] > 0):
        raise ValueError("initial Laplacian has a positive off-diagonal entry")
    spec = symmetric_eigendecomposition(l0)
    lam = spec.eigenvalues
    n_zero = int(np.sum(np.abs(lam) < ZERO_EIG_TOL * scale))
    if n_zero != 1:
        raise TopologyError(f"zero eigenvalue has multiplicity {n_zero}; graph is disconnected")
    q_tilde = _fix_signs(spec.eigenvectors[:, 1:])
    ones = np.full((m, 1), 1.0 / np.sqrt(m))
    q = np.hstack([ones, q_tilde])
    return SpectralFrame(m, q, q_tilde, lam[1:].copy())


def _check(f: SpectralFrame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != f.m:
        raise ValueError(f"state has length {x.shape[-1]}, frame expects {f.m}")
    return x


def disagreement(f: SpectralFrame, x) -> np.ndarray:
    """mu = Q_tilde^T x.  Works row-wise on a (T, M) stack of states."""
    x = _check(f, x)
    return x @ f.q_tilde


def consensus_coordinate(f: SpectralFrame, x) -> np.ndarray | float:
    """x_tilde_1 = 1^T x / sqrt(M)."""
    x = _check(f, x)
    return x.sum(axis=-1) / np.sqrt(f.m)


def split_components(f: SpectralFrame, x) -> tuple[np.ndarray, np.ndarray]:
    """(consensus part, disagreement part) via mean projection; they sum to x."""
    x = _check(f, x)
    consensus = np.broadcast_to(x.mean(axis=-1, keepdims=True), x.shape).copy()
    return consensus, x - consensus


def disagreement_energy(x) -> np.ndarray | float:
    """x^T (I - 11^T/M) x, i.e. |mu|^2 computed without the frame."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean(axis=-1, keepdims=True)
    return np.sum(c * c, axis=-1)
