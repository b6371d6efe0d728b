"""Angle averages over the torus T^m and time averages along Kronecker flows.

Observables are callables ``f(I, phi)`` taking broadcastable arrays whose last
axis indexes the modes and returning an array of shape ``batch + out``, where
``out`` is the (possibly empty) value shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.stats import qmc

Observable = Callable[[np.ndarray, np.ndarray], np.ndarray]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class QuadratureConfig:
    """Torus quadrature settings.

    ``nodes`` trapezoid points per angle (exact for trigonometric polynomials of
    degree < nodes) are used while ``m <= max_tensor_dim``; beyond that a
    scrambled Sobol set of ``qmc_points`` points, replicated ``qmc_reps`` times.
    """

    nodes: int = 8
    max_tensor_dim: int = 4
    qmc_points: int = 4096
    qmc_reps: int = 4
    seed: int = 0


DEFAULT_QUAD = QuadratureConfig()


def tensor_nodes(m: int, n: int) -> np.ndarray:
    """All ``n^m`` points of the uniform tensor grid on T^m, shape ``(n^m, m)``."""
    if m == 0:
        return np.zeros((1, 0))
    g = TWO_PI * np.arange(n) / n
    return np.stack(np.meshgrid(*([g] * m), indexing="ij"), axis=-1).reshape(-1, m)


def qmc_nodes(m: int, n: int, seed: int) -> np.ndarray:
    return TWO_PI * qmc.Sobol(d=m, scramble=True, seed=seed).random(n)


def _average_over_nodes(f: Observable, I: np.ndarray, phi_of_nodes: Callable[[np.ndarray], np.ndarray], nodes):
    """Mean of ``f(I, phi_of_nodes(nodes))`` over the node axis inserted after I's batch axes."""
    I = np.asarray(I, dtype=float)
    batch = I.shape[:-1]
    phi = phi_of_nodes(nodes)  # batch + (n, m)
    vals = np.asarray(f(I[..., None, :], phi))
    axis = len(batch)
    return vals.mean(axis=axis)


def haar_average(f: Observable, I, quad: QuadratureConfig = DEFAULT_QUAD, *, return_error: bool = False):
    """Average of ``f(I, .)`` over the torus against the Haar measure.

    ``I`` may carry leading batch axes. With ``return_error`` the result is a
    pair ``(value, error)``: the change when halving the tensor grid, or the
    standard error across independent Sobol scramblings.
    """
    I = np.asarray(I, dtype=float)
    m = I.shape[-1]
    batch = I.shape[:-1]

    def embed(nodes):
        return np.broadcast_to(nodes, batch + nodes.shape)

    if m <= quad.max_tensor_dim:
        value = _average_over_nodes(f, I, embed, tensor_nodes(m, quad.nodes))
        if not return_error:
            return value
        coarse = _average_over_nodes(f, I, embed, tensor_nodes(m, max(1, quad.nodes // 2)))
        return value, np.abs(value - coarse)
    reps = [
        _average_over_nodes(f, I, embed, qmc_nodes(m, quad.qmc_points, quad.seed + r)) for r in range(quad.qmc_reps)
    ]
    value = np.mean(reps, axis=0)
    if not return_error:
        return value
    err = np.std(reps, axis=0, ddof=1) / np.sqrt(len(reps)) if len(reps) > 1 else np.zeros_like(value)
    return value, err


def partial_average(f: Observable, N: int, quad: QuadratureConfig = DEFAULT_QUAD) -> Observable:
    """The observable averaged over the first ``N`` angles only."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if N == 0:
        return f
    if N <= quad.max_tensor_dim:
        nodes = tensor_nodes(N, quad.nodes)
    else:
        nodes = qmc_nodes(N, quad.qmc_points, quad.seed)

    def averaged(I, phi):
        I = np.asarray(I, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if N > phi.shape[-1]:
            raise ValueError(f"cannot average {N} angles of a {phi.shape[-1]}-torus")
        batch = np.broadcast_shapes(I.shape[:-1], phi.shape[:-1])
        tail = np.broadcast_to(phi[..., None, N:], batch + (nodes.shape[0], phi.shape[-1] - N))
        head = np.broadcast_to(nodes, batch + nodes.shape)
        full = np.concatenate([head, tail], axis=-1)
        vals = np.asarray(f(np.asarray(I)[..., None, :], full))
        return vals.mean(axis=len(batch))

    return averaged


def kronecker_time_average(
    f: Observable, I, phi0, W, T: float, *, epsabs: float = 1e-12, epsrel: float = 1e-10
) -> float:
    """``(1/T) int_0^T f(I, phi0 + W t) dt`` by adaptive quadrature on sub-intervals.

    The interval is cut into pieces spanning about one period of the fastest
    angle, each integrated with ``scipy.integrate.quad``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    I = np.asarray(I, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    W = np.asarray(W, dtype=float)

    def g(t):
        return float(f(I, phi0 + W * t))

    period = TWO_PI / max(float(np.max(np.abs(W))), 1e-12)
    n_pieces = max(1, int(np.ceil(T / period)))
    edges = np.linspace(0.0, T, n_pieces + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(g, lo, hi, epsabs=epsabs / n_pieces, epsrel=epsrel, limit=200)
        total += val
    return total / T
