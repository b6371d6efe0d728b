"""Averaged coefficients, fast-slow and averaged SDE simulation, and diagnostics."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import BoundaryWarning, IndefiniteCovariance, NonFinite
from .quadrature import DEFAULT_QUAD, QuadratureConfig, haar_average
from .system import AveragingSystem

log = logging.getLogger(__name__)

CLAMP_EIG = 1e-12
INDEFINITE_EIG = -1e-8
CLAMP_WARN_FRACTION = 0.01


@dataclass
class AveragedCoefficients:
    """``<F>(I)``, ``<A>(I)`` and the symmetric root ``sigma0(I)``; leading axes are batch axes."""

    F: np.ndarray
    A: np.ndarray
    sigma0: np.ndarray


def symmetric_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition.

    Eigenvalues with ``|lambda| < 1e-12`` (relative to the largest) are set to
    zero before taking roots.

    Raises
    ------
    IndefiniteCovariance
        If an eigenvalue is below ``-1e-8``.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    lam, V = np.linalg.eigh(A)
    if np.any(lam < INDEFINITE_EIG):
        raise IndefiniteCovariance(f"eigenvalue {lam.min():.3e} < {INDEFINITE_EIG}")
    scale = np.maximum(np.abs(lam).max(axis=-1, keepdims=True), 1.0)
    lam = np.where(np.abs(lam) < CLAMP_EIG * scale, 0.0, np.maximum(lam, 0.0))
    return (V * np.sqrt(lam)[..., None, :]) @ np.swapaxes(V, -1, -2)


def averaged_coefficients(sys: AveragingSystem, I, quad: QuadratureConfig = DEFAULT_QUAD) -> AveragedCoefficients:
    """Angle averages of the action drift and diffusion matrix at ``I`` (batched)."""
    I = np.asarray(I, dtype=float)
    F = haar_average(sys.drift_I, I, quad)
    A = haar_average(sys.diffusion_matrix, I, quad)
    return AveragedCoefficients(F, A, symmetric_sqrt(A))


def coefficients_from_system(sys: AveragingSystem, quad: QuadratureConfig = DEFAULT_QUAD) -> Callable:
    """Provider ``I -> AveragedCoefficients`` computed by quadrature."""
    return lambda I: averaged_coefficients(sys, I, quad)


def coefficients_from_closed_form(avg_F: Callable, avg_A: Callable) -> Callable:
    """Provider built from closed-form ``<F>(I)`` and ``<A>(I)``."""

    def provider(I):
        A = np.asarray(avg_A(I), dtype=float)
        return AveragedCoefficients(np.asarray(avg_F(I), dtype=float), A, symmetric_sqrt(A))

    return provider


@dataclass
class SlowPath:
    """Recorded ensemble path in slow time.

    ``I`` and ``phi`` have shape ``(n_records, n_paths, m)``; ``phi`` is None for
    averaged (action-only) paths. ``clamp_events`` counts per-path action clamps.
    """

    tau: np.ndarray
    I: np.ndarray
    phi: np.ndarray | None
    nu: float | None
    dt: float
    record_every: int
    clamp_events: np.ndarray
    n_steps: int
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.I.shape[1]

    @property
    def final_I(self) -> np.ndarray:
        return self.I[-1]

    def clamp_fraction(self) -> float:
        return float(self.clamp_events.sum() / max(self.n_steps * self.n_paths, 1))


def _initial_batch(x, n_paths):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim == 1:
        x = np.broadcast_to(x, (n_paths, x.size))
    if x.shape[0] != n_paths:
        raise ValueError(f"initial state has {x.shape[0]} rows for {n_paths} paths")
    return x.copy()


def _n_steps(T, dt):
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    return n


def _clamp(I, counts):
    neg = I < 0
    if neg.any():
        counts += neg.any(axis=-1)
        I[neg] = 0.0
    return I


def _finish(path: SlowPath) -> SlowPath:
    frac = path.clamp_fraction()
    if frac > CLAMP_WARN_FRACTION:
        warnings.warn(f"actions clamped at 0 in {frac:.2%} of steps", BoundaryWarning, stacklevel=3)
    return path


def simulate_fast_slow(
    sys: AveragingSystem,
    nu: float,
    I0,
    phi0,
    T: float,
    dt: float,
    rng: np.random.Generator,
    *,
    n_paths: int = 1,
    record_every: int = 1,
) -> SlowPath:
    """Euler-Maruyama for the action-angle system in slow time.

    One d-dimensional increment per step drives both the action and the angle
    equations. Negative actions are clamped to 0 and counted.

    Parameters
    ----------
    I0, phi0 : array_like
        Shape ``(m,)`` (shared by all paths) or ``(n_paths, m)``.
    record_every : int
        Store the state every this many steps (plus the initial state).

    Raises
    ------
    ValueError
        If ``dt > nu/10`` or the initial actions leave the octant interior.
    NonFinite
        If the state becomes non-finite.
    """
    if dt > nu / 10 * (1 + 1e-12):
        raise ValueError(f"dt={dt} does not resolve the fast rotation (need dt <= nu/10={nu / 10})")
    I = _initial_batch(I0, n_paths)
    phi = np.mod(_initial_batch(phi0, n_paths), 2 * np.pi)
    if I.shape[-1] != sys.m or phi.shape != I.shape:
        raise ValueError("initial actions/angles do not match the system dimension")
    if np.any(I <= 0):
        raise ValueError("initial actions must lie in the octant interior")
    n = _n_steps(T, dt)
    sq = np.sqrt(dt)
    counts = np.zeros(n_paths, dtype=np.int64)
    recs_I, recs_phi, taus = [I.copy()], [phi.copy()], [0.0]
    for step in range(1, n + 1):
        dB = sq * rng.standard_normal((n_paths, sys.d))
        dI = sys.drift_I(I, phi) * dt + np.einsum("...kd,...d->...k", sys.diff_I(I, phi), dB)
        dphi = (np.asarray(sys.W(I)) / nu + sys.drift_phi(I, phi)) * dt + np.einsum(
            "...kd,...d->...k", sys.diff_phi(I, phi), dB
        )
        I = _clamp(I + dI, counts)
        phi = np.mod(phi + dphi, 2 * np.pi)
        if not (np.all(np.isfinite(I)) and np.all(np.isfinite(phi))):
            raise NonFinite("fast-slow state became non-finite", t=step * dt)
        if step % record_every == 0:
            recs_I.append(I.copy())
            recs_phi.append(phi.copy())
            taus.append(step * dt)
    path = SlowPath(
        np.array(taus), np.array(recs_I), np.array(recs_phi), nu, dt, record_every, counts, n,
        meta={"system": sys.describe()},
    )
    return _finish(path)


def simulate_whitham(
    provider: Callable,
    I0,
    T: float,
    dt: float,
    rng: np.random.Generator,
    *,
    n_paths: int = 1,
    record_every: int = 1,
) -> SlowPath:
    """Euler-Maruyama for the averaged action SDE ``dI = <F>(I) dtau + sigma0(I) dW``.

    ``provider(I)`` returns :class:`AveragedCoefficients` for a batch of actions.
    Boundary handling is the same as in :func:`simulate_fast_slow`.
    """
    I = _initial_batch(I0, n_paths)
    if np.any(I <= 0):
        raise ValueError("initial actions must lie in the octant interior")
    m = I.shape[-1]
    n = _n_steps(T, dt)
    sq = np.sqrt(dt)
    counts = np.zeros(n_paths, dtype=np.int64)
    recs, taus = [I.copy()], [0.0]
    for step in range(1, n + 1):
        co = provider(I)
        dW = sq * rng.standard_normal((n_paths, m))
        I = _clamp(I + co.F * dt + np.einsum("...kl,...l->...k", co.sigma0, dW), counts)
        if not np.all(np.isfinite(I)):
            raise NonFinite("averaged state became non-finite", t=step * dt)
        if step % record_every == 0:
            recs.append(I.copy())
            taus.append(step * dt)
    return _finish(SlowPath(np.array(taus), np.array(recs), None, None, dt, record_every, counts, n))


def frequency_jacobian_det(sys: AveragingSystem, I) -> float:
    """``det(dW_j/dI_r)`` by central differences with step ``1e-5 max(I_j, 1)``."""
    I = np.asarray(I, dtype=float)
    m = I.size
    J = np.empty((m, m))
    for r in range(m):
        h = 1e-5 * max(abs(I[r]), 1.0)
        e = np.zeros(m)
        e[r] = h
        J[:, r] = (np.asarray(sys.W(I + e)) - np.asarray(sys.W(I - e))) / (2 * h)
    return float(np.linalg.det(J))


@dataclass
class DefectEstimate:
    """Per-component ``E max_tau |int_0^tau (F_k - <F_k>) ds|`` with standard errors."""

    value: np.ndarray
    stderr: np.ndarray
    n_paths: int

    @property
    def total(self) -> float:
        return float(self.value.sum())

    @property
    def total_stderr(self) -> float:
        return float(np.sqrt(np.sum(self.stderr**2)))


def khasminskii_defect(path: SlowPath, sys: AveragingSystem, quad: QuadratureConfig = DEFAULT_QUAD) -> DefectEstimate:
    """Monte Carlo estimate of the drift-averaging defect along recorded fast-slow paths.

    The time integral is a left Riemann sum over the recorded states, so paths
    should be recorded at every step (or at least well inside one fast period).
    """
    if path.phi is None:
        raise ValueError("defect needs angle records; use a fast-slow path")
    n_paths = path.n_paths
    m = path.I.shape[-1]
    if path.I.shape[0] < 2:
        return DefectEstimate(np.zeros(m), np.zeros(m), n_paths)
    h = path.dt * path.record_every
    running = np.zeros((n_paths, m))
    best = np.zeros((n_paths, m))
    for I, phi in zip(path.I[:-1], path.phi[:-1]):
        running += (sys.drift_I(I, phi) - haar_average(sys.drift_I, I, quad)) * h
        np.maximum(best, np.abs(running), out=best)
    se = best.std(axis=0, ddof=1) / np.sqrt(n_paths) if n_paths > 1 else np.zeros(m)
    return DefectEstimate(best.mean(axis=0), se, n_paths)
