"""Real trigonometric representation of zero-mean 2*pi-periodic functions.

A field is stored by its amplitudes ``u_s`` in the basis

    e_s(x) = cos(s x)    for s > 0
    e_s(x) = sin(|s| x)  for s < 0

which is orthonormal for the inner product ``<u, v> = (1/pi) int_0^{2pi} u v dx``.
Internally the dynamics work with the complex coefficients
``a_s = (u_s - i u_{-s}) / 2`` (s = 1..K) so that ``u(x) = sum 2 Re(a_s e^{isx})``;
``to_complex``/``from_complex`` convert between the two.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ModeOutOfRange, ZeroMeanViolation

__all__ = [
    "SpectralField",
    "Product",
    "default_grid_size",
    "from_modes",
    "from_grid",
    "zeros",
    "derivative",
    "pointwise_product",
    "sobolev_norm",
    "coefficient",
    "translate",
    "random_field",
    "to_complex",
    "from_complex",
    "grid_from_complex",
    "complex_from_grid",
    "write_field",
    "read_field",
]


def default_grid_size(K: int) -> int:
    """Smallest power of two N with N >= 4K."""
    n = 4
    while n < 4 * K:
        n *= 2
    return n


def _check_grid(K: int, N: int) -> None:
    if K < 1:
        raise ValueError(f"cutoff K must be positive, got {K}")
    if N < 4 * K or N & (N - 1):
        raise ValueError(f"grid size must be a power of two >= 4K={4 * K}, got {N}")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Zero-mean real field with modes ``1 <= |s| <= K``.

    ``cos[s-1]`` holds ``u_s`` and ``sin[s-1]`` holds ``u_{-s}``.
    """

    cos: np.ndarray
    sin: np.ndarray
    N: int = field(default=0)

    def __post_init__(self):
        c = np.array(self.cos, dtype=float)
        s = np.array(self.sin, dtype=float)
        if c.ndim != 1 or c.shape != s.shape:
            raise ValueError("cos and sin amplitude arrays must be 1-D and of equal length")
        c.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)
        N = self.N or default_grid_size(c.size)
        _check_grid(c.size, N)
        object.__setattr__(self, "N", N)

    @property
    def K(self) -> int:
        return self.cos.size

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.K + 1)

    def values(self, x: np.ndarray | None = None) -> np.ndarray:
        """Grid values on the N-point collocation grid, or at arbitrary points ``x``."""
        if x is None:
            return grid_from_complex(to_complex(self), self.N)
        x = np.asarray(x, dtype=float)
        sx = np.multiply.outer(x, self.modes)
        return np.cos(sx) @ self.cos + np.sin(sx) @ self.sin

    def grid(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.N) / self.N

    def amplitudes(self) -> dict[int, float]:
        """Nonzero amplitudes keyed by signed mode index."""
        out = {}
        for k in range(1, self.K + 1):
            if self.cos[k - 1] != 0.0:
                out[k] = float(self.cos[k - 1])
            if self.sin[k - 1] != 0.0:
                out[-k] = float(self.sin[k - 1])
        return dict(sorted(out.items(), key=lambda kv: (abs(kv[0]), -kv[0])))

    def __add__(self, other: SpectralField) -> SpectralField:
        _same_cutoff(self, other)
        return SpectralField(self.cos + other.cos, self.sin + other.sin, self.N)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _same_cutoff(self, other)
        return SpectralField(self.cos - other.cos, self.sin - other.sin, self.N)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(scalar * self.cos, scalar * self.sin, self.N)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(-self.cos, -self.sin, self.N)

    def allclose(self, other: SpectralField, atol: float = 1e-12, rtol: float = 0.0) -> bool:
        return (
            self.K == other.K
            and np.allclose(self.cos, other.cos, atol=atol, rtol=rtol)
            and np.allclose(self.sin, other.sin, atol=atol, rtol=rtol)
        )


class Product(NamedTuple):
    """Dealiased product: zero-mean part plus the separated constant term."""

    field: SpectralField
    mean: float


def _same_cutoff(f: SpectralField, g: SpectralField) -> None:
    if f.K != g.K:
        raise ValueError(f"cutoff mismatch: {f.K} != {g.K}")


def zeros(K: int, N: int | None = None) -> SpectralField:
    return SpectralField(np.zeros(K), np.zeros(K), N or 0)


def from_modes(pairs: Iterable[tuple[int, float]], K: int, N: int | None = None) -> SpectralField:
    """Build a field from ``(s, amplitude)`` pairs; unspecified modes are zero.

    Raises
    ------
    ZeroMeanViolation
        If a pair has ``s == 0``.
    ModeOutOfRange
        If ``|s| > K``.
    """
    c = np.zeros(K)
    s_ = np.zeros(K)
    for s, amp in pairs:
        s = int(s)
        if s == 0:
            raise ZeroMeanViolation("mode s=0 is not allowed in a zero-mean field")
        if abs(s) > K:
            raise ModeOutOfRange(f"mode {s} exceeds cutoff K={K}")
        if s > 0:
            c[s - 1] = amp
        else:
            s_[-s - 1] = amp
    return SpectralField(c, s_, N or 0)


def to_complex(f: SpectralField) -> np.ndarray:
    """Complex coefficients ``a_0..a_K`` with ``a_0 = 0``."""
    a = np.zeros(f.K + 1, dtype=complex)
    a[1:] = 0.5 * (f.cos - 1j * f.sin)
    return a


def from_complex(a: np.ndarray, N: int | None = None) -> SpectralField:
    """Inverse of :func:`to_complex`; ``a[0]`` is ignored."""
    a = np.asarray(a)
    return SpectralField(2.0 * a[1:].real, -2.0 * a[1:].imag, N or 0)


def grid_from_complex(a: np.ndarray, N: int) -> np.ndarray:
    """Collocation values from complex coefficients ``a[..., 0..K]`` (batched)."""
    K = a.shape[-1] - 1
    spec = np.zeros(a.shape[:-1] + (N // 2 + 1,), dtype=complex)
    spec[..., 1 : K + 1] = a[..., 1:] * N
    return np.fft.irfft(spec, n=N)


def complex_from_grid(u: np.ndarray, K: int) -> np.ndarray:
    """Complex coefficients ``a[..., 0..K]`` of grid values; ``a[..., 0]`` is the mean."""
    N = u.shape[-1]
    return np.fft.rfft(u)[..., : K + 1] / N


def from_grid(values: np.ndarray, K: int) -> SpectralField:
    """Project grid values onto modes ``1..K`` (the mean is discarded)."""
    values = np.asarray(values, dtype=float)
    return from_complex(complex_from_grid(values, K), values.size)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    """Exact spectral derivative of the given order."""
    if order < 0:
        raise ValueError("derivative order must be non-negative")
    c, s = f.cos, f.sin
    k = f.modes.astype(float)
    for _ in range(order):
        c, s = k * s, -k * c
    return SpectralField(c, s, f.N)


def pointwise_product(f: SpectralField, g: SpectralField) -> Product:
    """Collocation product of two fields, truncated back to ``|s| <= K``.

    Both factors are band-limited to K and ``N >= 4K``, so the product (modes up to
    2K) is represented on the grid without aliasing; this is the 2/3 rule with margin.
    """
    _same_cutoff(f, g)
    N = max(f.N, g.N)
    w = grid_from_complex(to_complex(f), N) * grid_from_complex(to_complex(g), N)
    a = complex_from_grid(w, f.K)
    return Product(from_complex(a, N), float(a[0].real))


def sobolev_norm(f: SpectralField, m: int = 0) -> float:
    """``||u||_m = (sum_s s^{2m} u_s^2)^{1/2}``."""
    w = f.modes.astype(float) ** (2 * m)
    return float(np.sqrt(np.sum(w * (f.cos**2 + f.sin**2))))


def coefficient(f: SpectralField, s: int) -> float:
    s = int(s)
    if s == 0 or abs(s) > f.K:
        raise ModeOutOfRange(f"mode {s} outside 1 <= |s| <= {f.K}")
    return float(f.cos[s - 1] if s > 0 else f.sin[-s - 1])


def translate(f: SpectralField, x0: float) -> SpectralField:
    """The field ``x -> u(x - x0)``; the pair ``(u_s, u_{-s})`` rotates by ``s*x0``."""
    th = f.modes * x0
    c, s = np.cos(th), np.sin(th)
    return SpectralField(f.cos * c - f.sin * s, f.cos * s + f.sin * c, f.N)


def random_field(
    rng: np.random.Generator, K: int, *, decay: float = 3.0, active: int | None = None, N: int | None = None
) -> SpectralField:
    """Gaussian field with amplitudes ~ |s|^-decay on the first ``active`` modes."""
    active = K if active is None else min(active, K)
    k = np.arange(1, K + 1, dtype=float)
    scale = np.where(k <= active, k**-decay, 0.0)
    return SpectralField(scale * rng.standard_normal(K), scale * rng.standard_normal(K), N or 0)


def write_field(f: SpectralField, path: str | Path) -> None:
    """Write ``<path>`` as CSV (``s,amplitude``) plus ``<path>.json`` with ``{K, N}``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "amplitude"])
        for s, amp in f.amplitudes().items():
            w.writerow([s, repr(amp)])
    Path(str(path) + ".json").write_text(json.dumps({"K": f.K, "N": f.N}, indent=2) + "\n")


def read_field(path: str | Path, K: int | None = None) -> SpectralField:
    path = Path(path)
    meta_path = Path(str(path) + ".json")
    N = None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        K = K or int(meta["K"])
        N = int(meta["N"])
    with path.open(newline="") as fh:
        rows = [(int(r["s"]), float(r["amplitude"])) for r in csv.DictReader(fh)]
    if K is None:
        K = max((abs(s) for s, _ in rows), default=1)
    return from_modes(rows, K, N)
