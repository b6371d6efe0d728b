"""Built-in systems with closed-form averaged dynamics, and JSON system specs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .system import AveragingSystem

_I_FLOOR = 1e-12


def rotating_ou(b=(1.0, 0.8, 0.6), w0=None, twist: float = 1.0, perturbation: float = 0.0) -> AveragingSystem:
    """Action-angle form of m independent rotating Ornstein-Uhlenbeck pairs.

    Each pair ``v_k in R^2`` solves ``dv_k = (W_k(I)/nu J v_k - v_k) dtau + b_k dbeta_k``
    with ``J`` the rotation generator and ``W_k(I) = w0_k + twist I_k``. With
    ``I_k = |v_k|^2/2`` the action is the CIR process

        dI_k = (b_k^2 - 2 I_k) dtau + b_k sqrt(2 I_k) dW_k

    for every nu. ``perturbation`` adds ``alpha sin(phi_k)`` to the action drift,
    which averages out.
    """
    b = np.asarray(b, dtype=float)
    m = b.size
    w0 = np.arange(1, m + 1, dtype=float) if w0 is None else np.asarray(w0, dtype=float)
    alpha = float(perturbation)

    def W(I):
        return w0 + twist * np.asarray(I)

    def F(I, phi):
        return b**2 - 2.0 * I + alpha * np.sin(phi)

    def sigma(I, phi):
        I, phi = np.broadcast_arrays(np.asarray(I, dtype=float), np.asarray(phi, dtype=float))
        r = np.sqrt(2.0 * np.maximum(I, 0.0))
        out = np.zeros(I.shape + (2 * m,))
        k = np.arange(m)
        out[..., k, 2 * k] = b * r * np.cos(phi)
        out[..., k, 2 * k + 1] = b * r * np.sin(phi)
        return out

    def g(I, phi):
        I, phi = np.broadcast_arrays(np.asarray(I, dtype=float), np.asarray(phi, dtype=float))
        r = np.sqrt(2.0 * np.maximum(I, _I_FLOOR))
        out = np.zeros(I.shape + (2 * m,))
        k = np.arange(m)
        out[..., k, 2 * k] = -b * np.sin(phi) / r
        out[..., k, 2 * k + 1] = b * np.cos(phi) / r
        return out

    params = {"b": b.tolist(), "w0": w0.tolist(), "twist": twist, "perturbation": alpha}
    return AveragingSystem(m=m, d=2 * m, W=W, F=F, sigma=sigma, g=g, name="rotating-ou", params=params)


def rotating_ou_averaged(b):
    """Closed-form ``<F>(I) = b^2 - 2I`` and diagonal ``<A>(I) = 2 b^2 I``."""
    b = np.asarray(b, dtype=float)

    def avg_F(I):
        return b**2 - 2.0 * np.asarray(I)

    def avg_A(I):
        I = np.asarray(I, dtype=float)
        return np.einsum("...k,kl->...kl", 2.0 * b**2 * I, np.eye(b.size))

    return avg_F, avg_A


def cir_mean(I0, b, tau):
    """``E I(tau)`` for ``dI = (b^2 - 2I) dtau + b sqrt(2I) dW``."""
    b2 = np.asarray(b, dtype=float) ** 2
    return b2 / 2 + (np.asarray(I0, dtype=float) - b2 / 2) * np.exp(-2.0 * tau)


def cir_variance(I0, b, tau):
    """``Var I(tau)`` of the same CIR process, started from the deterministic ``I0``."""
    b2 = np.asarray(b, dtype=float) ** 2
    I0 = np.asarray(I0, dtype=float)
    e = np.exp(-2.0 * tau)
    # kappa=2, theta=b^2/2, xi^2=2 b^2
    return I0 * (b2 / 2) * (e - e**2) * 2 + (b2 / 2) * (b2 / 2) * (1 - e) ** 2


def twist_system(c=(1.0, 1.0, 1.0), kappa: float = 0.5, s=(0.3, 0.3, 0.3), w0=None) -> AveragingSystem:
    """Angle-coupled system with ``W_k = w0_k + I_k`` and ``F_k = c_k - I_k (1 + kappa cos phi_k)``.

    The action noise is diagonal and constant (``sigma = diag(s)``), the angles
    carry no drift correction or noise. Its average is ``<F>_k = c_k - I_k``.
    """
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    m = c.size
    w0 = np.arange(1, m + 1, dtype=float) if w0 is None else np.asarray(w0, dtype=float)
    S = np.diag(s)

    def W(I):
        return w0 + np.asarray(I)

    def F(I, phi):
        return c - I * (1.0 + kappa * np.cos(phi))

    def sigma(I, phi):
        shape = np.broadcast_shapes(np.shape(I), np.shape(phi))
        return np.broadcast_to(S, shape + (m,)).copy()

    params = {"c": c.tolist(), "kappa": kappa, "s": s.tolist(), "w0": w0.tolist()}
    return AveragingSystem(m=m, d=m, W=W, F=F, sigma=sigma, name="twist", params=params)


CATALOG = {"rotating-ou": rotating_ou, "twist": twist_system}


def expression_system(spec: dict) -> AveragingSystem:
    """System from string expressions in ``I1..Im`` and ``phi1..phim``.

    ``spec`` keys: ``m``, ``d``, ``W`` (m strings), ``F`` (m strings), ``sigma``
    (m rows of d strings) and optionally ``G``, ``g``. Expressions are parsed
    with sympy and compiled to numpy.
    """
    import sympy as sp

    m, d = int(spec["m"]), int(spec["d"])
    Is = sp.symbols(f"I1:{m + 1}")
    phis = sp.symbols(f"phi1:{m + 1}")

    def compile_vec(exprs, with_phi=True):
        args = (*Is, *phis) if with_phi else Is
        fns = [sp.lambdify(args, sp.sympify(e), "numpy") for e in exprs]

        def call(I, phi=None):
            if with_phi:
                I, phi = np.broadcast_arrays(np.asarray(I, dtype=float), np.asarray(phi, dtype=float))
                parts = [I[..., j] for j in range(m)] + [phi[..., j] for j in range(m)]
                shape = I.shape[:-1]
            else:
                I = np.asarray(I, dtype=float)
                parts = [I[..., j] for j in range(m)]
                shape = I.shape[:-1]
            return np.stack([np.broadcast_to(np.asarray(fn(*parts), dtype=float), shape) for fn in fns], axis=-1)

        return call

    def compile_mat(rows):
        flat = compile_vec([e for row in rows for e in row])

        def call(I, phi):
            out = flat(I, phi)
            return out.reshape(out.shape[:-1] + (m, d))

        return call

    W_fn = compile_vec(spec["W"], with_phi=False)
    F_fn = compile_vec(spec["F"])
    sigma_fn = compile_mat(spec["sigma"])
    G_fn = compile_vec(spec["G"]) if "G" in spec else None
    g_fn = compile_mat(spec["g"]) if "g" in spec else None
    return AveragingSystem(
        m=m, d=d, W=W_fn, F=F_fn, sigma=sigma_fn, G=G_fn, g=g_fn, name=spec.get("name", "expression"), params=spec
    )


def load_system(name_or_path: str, params: dict | None = None) -> AveragingSystem:
    """Catalog entry by name, or a JSON file with either ``{"name", "params"}`` or expressions."""
    if name_or_path in CATALOG:
        return CATALOG[name_or_path](**(params or {}))
    doc = json.loads(Path(name_or_path).read_text())
    if "F" in doc:
        return expression_system(doc)
    return CATALOG[doc["name"]](**doc.get("params", {}))
