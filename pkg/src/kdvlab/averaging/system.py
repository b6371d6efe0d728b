"""Finite-dimensional slow-fast systems in action-angle form.

In slow time tau the system reads

    dI   = F(I, phi) dtau + sigma(I, phi) dbeta
    dphi = (W(I) / nu + G(I, phi)) dtau + g(I, phi) dbeta

with one d-dimensional Brownian motion beta shared by both lines. All maps act
on arrays with leading batch axes: ``W(I) -> (..., m)``, ``F, G -> (..., m)``,
``sigma, g -> (..., m, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _zero_drift(I, phi):
    return np.zeros(np.broadcast_shapes(np.shape(I), np.shape(phi)))


@dataclass
class AveragingSystem:
    m: int
    d: int
    W: Callable
    F: Callable
    sigma: Callable
    G: Callable | None = None
    g: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def drift_I(self, I, phi):
        return np.asarray(self.F(I, phi), dtype=float)

    def drift_phi(self, I, phi):
        if self.G is None:
            return _zero_drift(I, phi)
        return np.asarray(self.G(I, phi), dtype=float)

    def diff_I(self, I, phi):
        return np.asarray(self.sigma(I, phi), dtype=float)

    def diff_phi(self, I, phi):
        if self.g is None:
            shape = np.broadcast_shapes(np.shape(I), np.shape(phi))
            return np.zeros(shape + (self.d,))
        return np.asarray(self.g(I, phi), dtype=float)

    def diffusion_matrix(self, I, phi):
        """``a = sigma sigma^T``, shape ``(..., m, m)``."""
        s = self.diff_I(I, phi)
        return s @ np.swapaxes(s, -1, -2)

    def describe(self) -> dict:
        return {"name": self.name, "m": self.m, "d": self.d, "params": self.params}
