"""Deterministic KdV flow and the damped-driven stochastic KdV integrator.

The equation in original time t is

    du = (nu u_xx - V(u)) dt + sqrt(nu) sum_s b_s e_s dbeta_s,    V(u) = u_xxx - 6 u u_x.

In complex coefficients the linear part ``-u_xxx + nu u_xx`` is diagonal with
symbol ``i s^3 - nu s^2`` and is integrated exactly; ``6 u u_x = 3 (u^2)_x`` is
treated explicitly with RK4 stages and the noise is added as a plain
Euler-Maruyama increment.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import fourier
from .errors import NonFinite
from .fourier import SpectralField
from .records import TrajectoryRecord

log = logging.getLogger(__name__)

BLOWUP_NORM = 1.0e3
SCHEMES = ("imex-exponential", "explicit-rk-split")

__all__ = [
    "NoiseSpec",
    "SdeStepperConfig",
    "default_dt",
    "kdv_vector_field",
    "noise_increment",
    "step_deterministic",
    "step_spde",
    "integrate_path",
    "integrate_ensemble",
    "EnsembleResult",
]


def default_dt(K: int) -> float:
    return min(1e-3, 0.5 / K)


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Forcing amplitudes: ``b_cos[s-1] = b_s`` and ``b_sin[s-1] = b_{-s}``."""

    b_cos: np.ndarray
    b_sin: np.ndarray
    decay_checks: dict = field(default_factory=dict)

    def __post_init__(self):
        bc = np.array(self.b_cos, dtype=float)
        bs = np.array(self.b_sin, dtype=float)
        if bc.shape != bs.shape or bc.ndim != 1:
            raise ValueError("b_cos and b_sin must be 1-D arrays of equal length")
        if np.any(bc == 0) or np.any(bs == 0):
            raise ValueError("every forcing amplitude b_s must be nonzero")
        bc.setflags(write=False)
        bs.setflags(write=False)
        object.__setattr__(self, "b_cos", bc)
        object.__setattr__(self, "b_sin", bs)
        for m, C in self.decay_checks.items():
            if not self.satisfies_decay(int(m), float(C)):
                raise ValueError(f"|b_s| <= {C} |s|^-{m} violated")

    @classmethod
    def power_law(cls, K: int, q: float = 3.0, scale: float = 1.0) -> NoiseSpec:
        """``b_s = scale * |s|^-q`` for ``1 <= |s| <= K``."""
        b = scale * np.arange(1, K + 1, dtype=float) ** -q
        return cls(b, b.copy())

    @classmethod
    def from_mapping(cls, b: dict[int, float], K: int) -> NoiseSpec:
        bc = np.zeros(K)
        bs = np.zeros(K)
        for s, v in b.items():
            s = int(s)
            if s > 0:
                bc[s - 1] = v
            else:
                bs[-s - 1] = v
        return cls(bc, bs)

    @property
    def K(self) -> int:
        return self.b_cos.size

    def as_mapping(self) -> dict[int, float]:
        out = {}
        for k in range(1, self.K + 1):
            out[k] = float(self.b_cos[k - 1])
            out[-k] = float(self.b_sin[k - 1])
        return out

    def satisfies_decay(self, m: int, C: float) -> bool:
        k = np.arange(1, self.K + 1, dtype=float)
        bound = C * k ** (-m) * (1 + 1e-12)
        return bool(np.all(np.abs(self.b_cos) <= bound) and np.all(np.abs(self.b_sin) <= bound))

    def complex_scale(self) -> tuple[np.ndarray, np.ndarray]:
        """Factors mapping standard normals to complex-coefficient increments."""
        return 0.5 * self.b_cos, -0.5 * self.b_sin

    def to_dict(self) -> dict:
        return {"b_cos": self.b_cos.tolist(), "b_sin": self.b_sin.tolist()}


@dataclass(frozen=True)
class SdeStepperConfig:
    dt: float
    nu: float
    scheme: str = "imex-exponential"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.nu >= 0:
            raise ValueError("nu must be non-negative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")


def kdv_vector_field(u: SpectralField) -> SpectralField:
    """``V(u) = u_xxx - 6 u u_x``, with the square dealiased."""
    sq = fourier.pointwise_product(u, u).field
    return fourier.derivative(u, 3) - 3.0 * fourier.derivative(sq, 1)


class _Kernel:
    """Exponential-integrator step on batched complex coefficients ``a[..., 0..K]``."""

    def __init__(self, K: int, N: int, dt: float, nu: float, scheme: str = "imex-exponential"):
        self.K, self.N, self.dt, self.nu, self.scheme = K, N, dt, nu, scheme
        s = np.arange(K + 1, dtype=float)
        self.ik3 = 3j * s
        lin = 1j * s**3 - nu * s**2
        self.E = np.exp(lin * dt)
        self.E2 = np.exp(lin * dt / 2)

    def nonlinear(self, a: np.ndarray) -> np.ndarray:
        u = fourier.grid_from_complex(a, self.N)
        out = self.ik3 * fourier.complex_from_grid(u * u, self.K)
        out[..., 0] = 0.0
        return out

    def step(self, a: np.ndarray) -> np.ndarray:
        if self.scheme == "imex-exponential":
            return self._lawson_rk4(a)
        return self._strang_rk4(a)

    def _lawson_rk4(self, a):
        dt, E, E2, Nl = self.dt, self.E, self.E2, self.nonlinear
        k1 = Nl(a)
        k2 = Nl(E2 * (a + 0.5 * dt * k1))
        k3 = Nl(E2 * a + 0.5 * dt * k2)
        k4 = Nl(E * a + dt * E2 * k3)
        return E * a + (dt / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)

    def _strang_rk4(self, a):
        dt, Nl = self.dt, self.nonlinear
        a = self.E2 * a
        k1 = Nl(a)
        k2 = Nl(a + 0.5 * dt * k1)
        k3 = Nl(a + 0.5 * dt * k2)
        k4 = Nl(a + dt * k3)
        a = a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self.E2 * a


def _l2_norm(a: np.ndarray) -> np.ndarray:
    return 2.0 * np.sqrt(np.sum(np.abs(a[..., 1:]) ** 2, axis=-1))


def _check_finite(a: np.ndarray, t: float) -> None:
    n = _l2_norm(a)
    if not np.all(np.isfinite(n)):
        raise NonFinite("non-finite coefficients", t)
    if np.any(n > BLOWUP_NORM):
        raise NonFinite(f"||u||_0 exceeded blowup guard {BLOWUP_NORM:g}", t)


def noise_increment(spec: NoiseSpec, dt: float, rng: np.random.Generator) -> SpectralField:
    """``sum_s b_s xi_s sqrt(dt) e_s``; draws cos modes first, then sin modes."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    xi = rng.standard_normal(2 * spec.K)
    r = math.sqrt(dt)
    return SpectralField(spec.b_cos * xi[: spec.K] * r, spec.b_sin * xi[spec.K :] * r)


def _noise_complex(spec: NoiseSpec, xi: np.ndarray, scale: float) -> np.ndarray:
    """Complex increments from standard normals ``xi[..., 2K]`` (same layout as noise_increment)."""
    K = spec.K
    cr, ci = spec.complex_scale()
    out = np.zeros(xi.shape[:-1] + (K + 1,), dtype=complex)
    out[..., 1:] = scale * (cr * xi[..., :K] + 1j * ci * xi[..., K:])
    return out


def step_deterministic(u: SpectralField, dt: float) -> SpectralField:
    """One integrating-factor RK4 step of ``u_t + V(u) = 0``."""
    ker = _Kernel(u.K, u.N, dt, 0.0)
    a = ker.step(fourier.to_complex(u))
    _check_finite(a, dt)
    return fourier.from_complex(a, u.N)


def step_spde(
    u: SpectralField, cfg: SdeStepperConfig, spec: NoiseSpec | None, rng: np.random.Generator | None
) -> SpectralField:
    """One step of the damped-driven equation; ``spec=None`` means no forcing."""
    ker = _Kernel(u.K, u.N, cfg.dt, cfg.nu, cfg.scheme)
    a = ker.step(fourier.to_complex(u))
    if spec is not None and cfg.nu > 0:
        _check_spec(spec, u.K)
        xi = rng.standard_normal(2 * u.K)
        a = a + _noise_complex(spec, xi, math.sqrt(cfg.nu * cfg.dt))
    _check_finite(a, cfg.dt)
    return fourier.from_complex(a, u.N)


def _check_spec(spec: NoiseSpec, K: int) -> None:
    if spec.K != K:
        raise ValueError(f"noise spec has K={spec.K}, field has K={K}")


Observer = Callable[[SpectralField], dict]


@dataclass
class EnsembleResult:
    """Observations for a batch of trajectories sharing initial data and config."""

    t: np.ndarray
    nu: float
    records: list  # TrajectoryRecord, or None for failed trajectories
    final: list  # final SpectralField, or None
    failures: dict = field(default_factory=dict)  # index -> message

    @property
    def n_ok(self) -> int:
        return sum(r is not None for r in self.records)


def _observation_schedule(T: float, dt: float, obs_interval: float | None) -> tuple[int, int]:
    if T < 0:
        raise ValueError("T must be non-negative")
    if T == 0:
        return 1, 0
    if obs_interval is None or obs_interval >= T:
        obs_interval = T
    steps_per_obs = max(1, int(round(obs_interval / dt)))
    n_obs = max(1, int(round(T / (steps_per_obs * dt))))
    return steps_per_obs, n_obs


def integrate_ensemble(
    u0: SpectralField,
    T: float,
    cfg: SdeStepperConfig,
    spec: NoiseSpec | None,
    rngs: Sequence[np.random.Generator],
    observer: Observer | None = None,
    *,
    obs_interval: float | None = None,
    burn_in: float = 0.0,
    block: int = 256,
    meta: dict | None = None,
) -> EnsembleResult:
    """Integrate one trajectory per generator in ``rngs`` from the common ``u0``.

    The first ``burn_in`` time units are run unobserved; observations follow at
    ``t = burn_in + k * steps_per_obs * dt`` up to ``burn_in + T``. Trajectory ``i``
    draws its noise only from ``rngs[i]``, in blocks of at most ``block`` steps, so
    its path does not depend on the batch it was run in. A trajectory that blows
    up is frozen, logged and reported in ``failures``; the others continue.
    """
    n = len(rngs)
    if n == 0:
        raise ValueError("need at least one trajectory")
    if spec is not None:
        _check_spec(spec, u0.K)
    observer = observer or (lambda f: {})
    steps_per_obs, n_obs = _observation_schedule(T, cfg.dt, obs_interval)
    burn_steps = int(round(burn_in / cfg.dt)) if burn_in > 0 else 0
    ker = _Kernel(u0.K, u0.N, cfg.dt, cfg.nu, cfg.scheme)
    forced = spec is not None and cfg.nu > 0
    noise_scale = math.sqrt(cfg.nu * cfg.dt)
    total_steps = burn_steps + steps_per_obs * n_obs

    a = np.repeat(fourier.to_complex(u0)[None, :], n, axis=0)
    alive = np.ones(n, dtype=bool)
    failures: dict[int, str] = {}
    buf = np.empty((0, n, 2 * u0.K))
    buf_pos = 0
    step = 0

    def advance(n_steps):
        nonlocal a, buf, buf_pos, step
        for _ in range(n_steps):
            a = ker.step(a)
            if forced:
                if buf_pos >= len(buf):
                    m = min(block, total_steps - step)
                    buf = np.stack([g.standard_normal((m, 2 * u0.K)) for g in rngs], axis=1)
                    buf_pos = 0
                a = a + _noise_complex(spec, buf[buf_pos], noise_scale)
                buf_pos += 1
            step += 1
            norms = _l2_norm(a)
            bad = alive & ~(np.isfinite(norms) & (norms <= BLOWUP_NORM))
            if bad.any():
                t_fail = step * cfg.dt
                for i in np.flatnonzero(bad):
                    msg = f"blowup or non-finite state at t={t_fail:.6g}"
                    failures[int(i)] = msg
                    log.warning("trajectory %d failed: %s", i, msg)
                alive[bad] = False
                a[~alive] = 0.0

    advance(burn_steps)
    times = [step * cfg.dt]
    obs: list[list[dict]] = [
        [observer(fourier.from_complex(a[i], u0.N))] if alive[i] else [] for i in range(n)
    ]
    for _ in range(n_obs):
        advance(steps_per_obs)
        times.append(step * cfg.dt)
        for i in np.flatnonzero(alive):
            obs[i].append(observer(fourier.from_complex(a[i], u0.N)))

    t = np.array(times)
    records: list = []
    finals: list = []
    for i in range(n):
        if not alive[i]:
            records.append(None)
            finals.append(None)
            continue
        keys = list(obs[i][0])
        cols = {key: np.array([o[key] for o in obs[i]], dtype=float) for key in keys}
        rec_meta = dict(meta or {})
        rec_meta.update(
            {"nu": cfg.nu, "dt": cfg.dt, "scheme": cfg.scheme, "K": u0.K, "N": u0.N, "index": i, "burn_in": burn_in}
        )
        records.append(TrajectoryRecord(t=t.copy(), nu=cfg.nu, columns=cols, meta=rec_meta))
        finals.append(fourier.from_complex(a[i], u0.N))
    return EnsembleResult(t=t, nu=cfg.nu, records=records, final=finals, failures=failures)


def integrate_path(
    u0: SpectralField,
    T: float,
    cfg: SdeStepperConfig,
    spec: NoiseSpec | None,
    rng: np.random.Generator | None,
    observers: Sequence[Observer] | Observer | None = None,
    *,
    obs_interval: float | None = None,
    meta: dict | None = None,
) -> TrajectoryRecord:
    """Single trajectory; raises :class:`NonFinite` with the failing time on blowup."""
    if observers is None:
        observer = None
    elif callable(observers):
        observer = observers
    else:
        obs_list = list(observers)

        def observer(f):
            out = {}
            for o in obs_list:
                out.update(o(f))
            return out

    rng = rng if rng is not None else np.random.default_rng(0)
    res = integrate_ensemble(u0, T, cfg, spec, [rng], observer, obs_interval=obs_interval, meta=meta)
    if res.failures:
        msg = res.failures[0]
        t_fail = float(msg.rsplit("t=", 1)[1])
        raise NonFinite("trajectory failed", t_fail)
    return res.records[0]
