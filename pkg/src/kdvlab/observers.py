"""Observers evaluated along trajectories."""

from __future__ import annotations

from . import conserved, fourier, hill
from .fourier import SpectralField


def norms(f: SpectralField) -> dict:
    return {f"norm{m}": fourier.sobolev_norm(f, m) for m in (0, 1, 2)}


def functionals(f: SpectralField) -> dict:
    return {f"J{m}": v for m, v in enumerate(conserved.j_all(f))}


class HillObserver:
    """Gap actions ``I_1..I_m`` and linearized angles ``phi_1..phi_m``."""

    def __init__(self, m_obs: int, K_spec: int | None = None, M_trunc: int | None = None):
        self.m_obs = m_obs
        self.K_spec = max(K_spec or m_obs, m_obs)
        self.M_trunc = M_trunc or 4 * self.K_spec

    def __call__(self, f: SpectralField) -> dict:
        spec = hill.band_edges(f, self.K_spec, self.M_trunc)
        I = hill.actions_from_gaps(spec).I
        phi = hill.linearized_angles(f, min(self.m_obs, f.K)).phi
        out = {f"I_{k}": float(I[k - 1]) for k in range(1, self.m_obs + 1)}
        out.update({f"phi_{k}": float(phi[k - 1]) for k in range(1, self.m_obs + 1)})
        return out


class StandardObserver:
    """Columns ``norm0..2, J0..J2, I_1..I_m, phi_1..phi_m`` in that order."""

    def __init__(self, m_obs: int = 3, K_spec: int | None = None, M_trunc: int | None = None):
        self.hill = HillObserver(m_obs, K_spec, M_trunc)

    def __call__(self, f: SpectralField) -> dict:
        out = norms(f)
        out.update(functionals(f))
        out.update(self.hill(f))
        return out
