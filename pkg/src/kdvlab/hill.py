"""Periodic spectrum of the Hill operator ``-y'' + u y`` and action/angle estimators.

Band edges come from dense Hermitian eigenproblems in the exponential bases
``e^{inx}`` (periodic) and ``e^{i(n+1/2)x}`` (antiperiodic), truncated at
``|n| <= M_trunc``. Gap ``k`` sits near ``(k/2)^2``: odd gaps are antiperiodic
eigenvalue pairs, even gaps periodic ones.

Actions are estimated two ways:

* linearized: ``I_k = (u_k^2 + u_{-k}^2) / (2k)``, the image of the linearized
  Birkhoff map ``u_s -> |s|^{-1/2} u_s``;
* gap-quadratic: ``I_k = c * gamma_k^2 / k`` with ``c`` calibrated against the
  linearized route on small single-mode potentials (:func:`calibrate_gap_constant`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import fourier
from .errors import TruncationError
from .fourier import SpectralField

ANGLE_FLOOR = 1e-14

# Output of calibrate_gap_constant() with the default design; see GAP_CONSTANT_LOG.
GAP_ACTION_CONSTANT = 0.5000978453909537
GAP_CONSTANT_LOG = (
    "least-squares slope through the origin of linearized I_k against gamma_k^2/k for "
    "u = a cos(kx), a in {0.01,...,0.05}, k in {1,2,3}, K_spec=4, M_trunc=32 "
    "(kdvlab.hill.calibrate_gap_constant)"
)
CALIBRATION_AMPLITUDES = (0.01, 0.02, 0.03, 0.04, 0.05)
CALIBRATION_MODES = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class HillSpectrum:
    """Edges ``lambda_0 < lambda_1 <= lambda_2 < ...`` up to index ``2 K_spec``."""

    edges: np.ndarray

    @property
    def K_spec(self) -> int:
        return (self.edges.size - 1) // 2

    @property
    def gaps(self) -> np.ndarray:
        """``gamma_k = lambda_{2k} - lambda_{2k-1}`` for k = 1..K_spec (clipped at 0)."""
        e = self.edges
        return np.maximum(e[2::2] - e[1::2], 0.0)

    def gap_edges(self, k: int) -> tuple[float, float]:
        return float(self.edges[2 * k - 1]), float(self.edges[2 * k])


@dataclass
class ActionAngleState:
    """Actions ``I_1..I_m`` and, when available, angles ``phi_1..phi_m`` in [0, 2pi)."""

    I: np.ndarray
    phi: np.ndarray | None = None
    undefined: np.ndarray | None = None  # True where the angle is degenerate
    p: float = 1.0

    def __post_init__(self):
        self.I = np.asarray(self.I, dtype=float)
        if np.any(self.I < 0):
            raise ValueError("actions must be non-negative")

    @property
    def m(self) -> int:
        return self.I.size

    def weighted_norm(self, p: float | None = None) -> float:
        """``|I|_{h_I^p} = 2 sum_j j^{1+2p} |I_j|``."""
        p = self.p if p is None else p
        j = np.arange(1, self.m + 1, dtype=float)
        return float(2.0 * np.sum(j ** (1 + 2 * p) * np.abs(self.I)))


def _fourier_coeffs(u: SpectralField, nmax: int) -> np.ndarray:
    """Complex coefficients ``c[n + nmax] = u_hat_n`` for ``|n| <= nmax``."""
    a = fourier.to_complex(u)
    c = np.zeros(2 * nmax + 1, dtype=complex)
    kk = min(u.K, nmax)
    c[nmax + 1 : nmax + 1 + kk] = a[1 : kk + 1]
    c[nmax - kk : nmax][::-1] = np.conj(a[1 : kk + 1])
    return c


def hill_matrix(u: SpectralField, M_trunc: int, antiperiodic: bool = False) -> np.ndarray:
    """Hermitian matrix of ``-d^2/dx^2 + u`` in the truncated exponential basis."""
    if antiperiodic:
        n = np.arange(-M_trunc - 1, M_trunc + 1) + 0.5
    else:
        n = np.arange(-M_trunc, M_trunc + 1).astype(float)
    size = n.size
    c = _fourier_coeffs(u, size)
    idx = np.arange(size)
    diff = idx[:, None] - idx[None, :]
    H = c[diff + size]
    H[idx, idx] += n**2
    return H


def band_edges(u: SpectralField, K_spec: int, M_trunc: int) -> HillSpectrum:
    """Periodic/antiperiodic eigenvalues merged into band-edge order.

    Raises
    ------
    TruncationError
        If ``M_trunc < 4 K_spec`` or the computed edges fail to interlace.
    """
    if K_spec < 1:
        raise ValueError("K_spec must be positive")
    if M_trunc < 4 * K_spec:
        raise TruncationError(f"M_trunc={M_trunc} < 4*K_spec={4 * K_spec}")
    per = linalg.eigh(hill_matrix(u, M_trunc), eigvals_only=True, subset_by_index=[0, K_spec + 1])
    anti = linalg.eigh(hill_matrix(u, M_trunc, True), eigvals_only=True, subset_by_index=[0, K_spec + 1])
    edges = np.empty(2 * K_spec + 1)
    edges[0] = per[0]
    for k in range(1, K_spec + 1):
        src = anti if k % 2 else per
        edges[2 * k - 1], edges[2 * k] = src[k - 1], src[k]
    # interlacing: lambda_{2k} < lambda_{2k+1} between bands, up to rounding
    tol = 1e-9 * max(1.0, abs(edges[-1]))
    if np.any(np.diff(edges) < -tol):
        raise TruncationError("band edges do not interlace; increase M_trunc")
    return HillSpectrum(edges)


def actions_from_gaps(spec: HillSpectrum, c: float = GAP_ACTION_CONSTANT) -> ActionAngleState:
    k = np.arange(1, spec.K_spec + 1, dtype=float)
    return ActionAngleState(c * spec.gaps**2 / k)


def linearized_actions(u: SpectralField, m: int) -> ActionAngleState:
    if m > u.K:
        raise ValueError(f"m={m} exceeds field cutoff K={u.K}")
    k = np.arange(1, m + 1, dtype=float)
    return ActionAngleState((u.cos[:m] ** 2 + u.sin[:m] ** 2) / (2 * k))


def linearized_angles(u: SpectralField, m: int, angle_floor: float = ANGLE_FLOOR) -> ActionAngleState:
    """``phi_k = atan2(u_{-k}, u_k) mod 2pi``; flagged undefined when ``u_k^2 + u_{-k}^2 < angle_floor``."""
    if m > u.K:
        raise ValueError(f"m={m} exceeds field cutoff K={u.K}")
    c, s = u.cos[:m], u.sin[:m]
    phi = np.mod(np.arctan2(s, c), 2 * np.pi)
    undefined = c**2 + s**2 < angle_floor
    phi = np.where(undefined, np.nan, phi)
    k = np.arange(1, m + 1, dtype=float)
    return ActionAngleState((c**2 + s**2) / (2 * k), phi, undefined)


def gap_action_table(u: SpectralField, K_spec: int, M_trunc: int) -> list[dict]:
    """Rows ``k, lambda_lo, lambda_hi, gap, action_gap, action_lin, angle`` for k = 1..K_spec."""
    spec = band_edges(u, K_spec, M_trunc)
    ag = actions_from_gaps(spec).I
    m = min(K_spec, u.K)
    lin = linearized_angles(u, m)
    rows = []
    for k in range(1, K_spec + 1):
        lo, hi = spec.gap_edges(k)
        rows.append(
            {
                "k": k,
                "lambda_lo": lo,
                "lambda_hi": hi,
                "gap": float(spec.gaps[k - 1]),
                "action_gap": float(ag[k - 1]),
                "action_lin": float(lin.I[k - 1]) if k <= m else 0.0,
                "angle": float(lin.phi[k - 1]) if k <= m else float("nan"),
            }
        )
    return rows


@dataclass
class GapCalibration:
    constant: float
    points: list[tuple[int, float, float, float]]  # (k, a, gamma^2/k, linearized I_k)
    loo_max_rel_error: float
    log: list[str] = field(default_factory=list)


def calibrate_gap_constant(
    amplitudes=CALIBRATION_AMPLITUDES, modes=CALIBRATION_MODES, K_spec: int = 4, M_trunc: int = 32
) -> GapCalibration:
    """Slope ``c`` of linearized actions against ``gamma_k^2 / k``, with leave-one-out error.

    The leave-one-out error is the worst relative mismatch between the linearized
    action of a held-out potential and ``c_{-i} gamma^2/k`` with ``c_{-i}`` fitted
    on the remaining points.
    """
    K = max(max(modes), K_spec)
    pts = []
    for k in modes:
        for a in amplitudes:
            u = fourier.from_modes([(k, a)], K)
            g = band_edges(u, K_spec, M_trunc).gaps[k - 1]
            pts.append((k, a, g**2 / k, float(linearized_actions(u, k).I[k - 1])))
    x = np.array([p[2] for p in pts])
    y = np.array([p[3] for p in pts])
    c = float(x @ y / (x @ x))
    loo = []
    for i in range(len(pts)):
        mask = np.arange(len(pts)) != i
        ci = x[mask] @ y[mask] / (x[mask] @ x[mask])
        loo.append(abs(ci * x[i] - y[i]) / y[i])
    log = [GAP_CONSTANT_LOG, f"c={c!r}", f"leave-one-out max relative error={max(loo):.3e}"]
    return GapCalibration(c, pts, float(max(loo)), log)
