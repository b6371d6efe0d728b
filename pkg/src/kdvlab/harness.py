"""Experiment orchestration: configs, persisted KdV ensembles and the reports built on them."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__, conserved, dynamics, fourier, hill, rng, stats
from .observers import StandardObserver
from .records import TrajectoryRecord, format_float, write_csv, write_json

log = logging.getLogger(__name__)

DEFAULT_U0 = ((1, 0.3), (-2, 0.15))
DELTA_FRACTIONS = (1e-1, 1e-2, 1e-3)


@dataclass
class RunConfig:
    """Configuration of a KdV ensemble run; the JSON form mirrors these fields.

    Times are in slow units ``tau = nu t`` except ``dt`` (original time).
    ``burn_in`` is in units of ``1/nu`` original time, i.e. slow time.
    ``u0`` lists ``(s, amplitude)`` pairs in the cos/sin basis.
    """

    K: int = 32
    N: int | None = None
    K_spec: int = 3
    M_trunc: int | None = None
    m_obs: int = 3
    nu_ladder: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    dt: float = 5e-3
    T: float = 1.0
    burn_in: float = 10.0
    obs_interval: float | None = None
    ensemble_size: int = 16
    noise_q: float = 3.0
    noise_scale: float = 1.0
    u0: list = field(default_factory=lambda: [list(p) for p in DEFAULT_U0])
    scheme: str = "imex-exponential"
    master_seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        self.nu_ladder = [float(v) for v in self.nu_ladder]
        self.u0 = [[int(s), float(a)] for s, a in self.u0]
        if self.ensemble_size < 2:
            raise ValueError("ensemble_size must be at least 2")
        if len(set(self.nu_ladder)) != len(self.nu_ladder):
            raise ValueError("nu values must be distinct")
        if any(not 0 < v <= 1 for v in self.nu_ladder):
            raise ValueError("nu values must lie in (0, 1]")
        if self.m_obs > self.K or self.m_obs < 1:
            raise ValueError("need 1 <= m_obs <= K")
        if self.T < 0 or self.burn_in < 0 or self.dt <= 0:
            raise ValueError("T, burn_in must be non-negative and dt positive")
        self.K_spec = max(self.K_spec, self.m_obs)
        if self.scheme not in dynamics.SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def hill_truncation(self) -> int:
        return self.M_trunc or max(4 * self.K_spec, self.K)

    def noise(self) -> dynamics.NoiseSpec:
        return dynamics.NoiseSpec.power_law(self.K, self.noise_q, self.noise_scale)

    def initial_field(self) -> fourier.SpectralField:
        return fourier.from_modes([tuple(p) for p in self.u0], self.K, self.N)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring ``out_dir``."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def derived_constants() -> dict:
    return {
        "gap_action_constant": {"c": hill.GAP_ACTION_CONSTANT, "provenance": hill.GAP_CONSTANT_LOG},
        "j_coefficients": {
            "c1": conserved.J1_CUBIC,
            "c2": conserved.J2_GRAD,
            "c3": conserved.J2_QUARTIC,
            "provenance": conserved.J_PROVENANCE,
        },
    }


def versions() -> dict:
    return {"kdvlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _nu_dir(out: Path, j: int) -> Path:
    return out / f"nu_{j}"


def run_ensemble(cfg: RunConfig, out_dir: str | Path | None = None) -> Path:
    """Simulate ``ensemble_size`` SPDE trajectories per ladder value and persist them.

    Trajectory ``i`` at ladder index ``j`` uses the random stream keyed by
    ``(master_seed, j, i)``. After a burn-in of ``burn_in/nu`` original time it is
    observed every ``obs_interval`` slow time units up to ``T`` more. Records go
    to ``<out>/nu_<j>/traj_<i>.csv``; failed trajectories are skipped and counted
    in ``<out>/manifest.json``.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u0 = cfg.initial_field()
    spec = cfg.noise()
    observer = StandardObserver(cfg.m_obs, cfg.K_spec, cfg.hill_truncation)
    ladder = []
    for j, nu in enumerate(cfg.nu_ladder):
        step_cfg = dynamics.SdeStepperConfig(cfg.dt, nu, cfg.scheme)
        gens = rng.streams(cfg.master_seed, cfg.ensemble_size, j)
        obs = None if cfg.obs_interval is None else cfg.obs_interval / nu
        res = dynamics.integrate_ensemble(
            u0, cfg.T / nu, step_cfg, spec, gens, observer,
            obs_interval=obs, burn_in=cfg.burn_in / nu, meta={"master_seed": cfg.master_seed, "nu_index": j},
        )
        d = _nu_dir(out, j)
        d.mkdir(exist_ok=True)
        for i, rec in enumerate(res.records):
            if rec is not None:
                rec.to_csv(d / f"traj_{i:04d}.csv")
        if res.failures:
            log.warning("nu=%g: %d of %d trajectories failed", nu, len(res.failures), cfg.ensemble_size)
        ladder.append(
            {"index": j, "nu": nu, "dir": d.name, "n_ok": res.n_ok,
             "failures": {str(k): v for k, v in sorted(res.failures.items())}}
        )
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "master_seed": cfg.master_seed,
        "seeding": "Philox(SeedSequence([master_seed, nu_index, trajectory_index]))",
        "noise": {"profile": f"b_s = {cfg.noise_scale} |s|^-{cfg.noise_q}", "B0": conserved.noise_constant(spec, 0),
                  "B1": conserved.noise_constant(spec, 1)},
        "ladder": ladder,
        "versions": versions(),
        "derived_constants": derived_constants(),
    }
    write_json(out / "manifest.json", manifest)
    return out


# ---------------------------------------------------------------------------
# persisted samples


@dataclass
class EnsembleSamples:
    """Action/angle observations of one ensemble: arrays ``(n_traj, n_obs, m)``."""

    nu: float
    tau: np.ndarray
    I: np.ndarray
    phi: np.ndarray | None = None
    extra: dict = field(default_factory=dict)  # name -> (n_traj, n_obs)

    @property
    def n(self) -> int:
        return self.I.shape[0]

    @property
    def m(self) -> int:
        return self.I.shape[2]

    @classmethod
    def from_records(cls, nu: float, records: list[TrajectoryRecord], m_obs: int) -> EnsembleSamples:
        if not records:
            raise ValueError(f"no records for nu={nu}")
        tau = records[0].tau
        I = np.stack([np.column_stack([r[f"I_{k}"] for k in range(1, m_obs + 1)]) for r in records])
        phi = np.stack([np.column_stack([r[f"phi_{k}"] for k in range(1, m_obs + 1)]) for r in records])
        names = [c for c in records[0].columns if not c.startswith(("I_", "phi_"))]
        extra = {c: np.stack([r[c] for r in records]) for c in names}
        return cls(nu, tau, I, phi, extra)

    @classmethod
    def from_slow_path(cls, path) -> EnsembleSamples:
        """From an averaging-engine path (records ``(n_rec, n_paths, m)``)."""
        I = np.transpose(path.I, (1, 0, 2))
        phi = None if path.phi is None else np.transpose(path.phi, (1, 0, 2))
        return cls(float(path.nu) if path.nu is not None else 0.0, np.asarray(path.tau), I, phi)


@dataclass
class RunData:
    config: RunConfig
    manifest: dict
    samples: list[EnsembleSamples]


def load_run(out_dir: str | Path) -> RunData:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = RunConfig.from_dict(manifest["config"])
    samples = []
    for entry in manifest["ladder"]:
        files = sorted((out / entry["dir"]).glob("traj_*.csv"))
        recs = [TrajectoryRecord.from_csv(f) for f in files]
        samples.append(EnsembleSamples.from_records(entry["nu"], recs, cfg.m_obs))
    return RunData(cfg, manifest, samples)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def write(self, path: str | Path) -> None:
        write_csv(path, self.header, self.rows)

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]


@dataclass
class Report:
    name: str
    tables: dict[str, Table]
    summary: dict = field(default_factory=dict)

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for key, table in self.tables.items():
            p = out / f"{self.name}_{key}.csv"
            table.write(p)
            paths.append(p)
        p = out / f"{self.name}_summary.json"
        write_json(p, self.summary)
        paths.append(p)
        return paths


def _decreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))


def theorem_a_report(ensembles: list[EnsembleSamples], deltas=DELTA_FRACTIONS, alpha: float = 0.01) -> Report:
    """Cauchy-in-nu distances between action marginals plus small-action tables.

    ``ensembles`` are ordered along the ladder and must share the observation
    schedule. Distances compare consecutive ladder entries mode by mode at each
    checkpoint. Small-action frequencies use the final checkpoint with
    ``delta = fraction * median(I_k)`` per ensemble.
    """
    if len(ensembles) < 2:
        raise ValueError("need at least two ensembles")
    n_obs = min(e.I.shape[1] for e in ensembles)
    m = ensembles[0].m
    dist = Table(["nu_a", "nu_b", "tau", "k", "distance", "pvalue", "critical", "n_a", "n_b"])
    final = {}
    for a, b in zip(ensembles[:-1], ensembles[1:]):
        for t in range(n_obs):
            for k in range(m):
                xa, xb = a.I[:, t, k], b.I[:, t, k]
                d = stats.law_distance(xa, xb)
                p = float(stats.law_distance_pvalues(xa, xb)[0])
                crit = stats.ks_critical(xa.size, xb.size, alpha)
                dist.rows.append([a.nu, b.nu, float(a.tau[t]), k + 1, d, p, crit, xa.size, xb.size])
                if t == n_obs - 1:
                    final.setdefault(k + 1, []).append(d)
    small = Table(["nu", "tau", "k", "delta_fraction", "delta", "p", "ci_low", "ci_high", "count", "n"])
    small_ok = {}
    for e in ensembles:
        for k in range(m):
            x = e.I[:, -1, k]
            med = float(np.median(x))
            ps = []
            for frac in deltas:
                pr = stats.small_action_probability(x, frac * med) if med > 0 else stats.proportion(x.size, x.size)
                small.rows.append([e.nu, float(e.tau[-1]), k + 1, frac, frac * med, pr.p, pr.low, pr.high, pr.count, pr.n])
                ps.append(pr.p)
            small_ok[f"nu={e.nu!r},k={k + 1}"] = bool(np.all(np.diff(ps) <= 0) and ps[-1] < 0.05)
    trend = {}
    if len(ensembles) >= 3:
        trend = {f"k={k}": bool(d[0] > d[1]) for k, d in final.items()}
    summary = {
        "ladder": [e.nu for e in ensembles],
        "n": [e.n for e in ensembles],
        "distance_trend_first_pair_gt_second": trend,
        "distances_below_critical_final": {
            f"k={k}": [bool(d <= stats.ks_critical(ensembles[0].n, ensembles[1].n, alpha)) for d in v]
            for k, v in final.items()
        },
        "small_action_decreasing_below_0.05": small_ok,
    }
    return Report("theorem_a", {"distances": dist, "small_action": small}, summary)


def theorem_b_report(ensembles: list[EnsembleSamples], at: int = -1, alpha: float = 0.01) -> Report:
    """Angle uniformity and action-angle correlations at one checkpoint per ensemble.

    Uses one observation per trajectory (index ``at``), so samples within an
    ensemble are independent. The trend flag records whether the first circular
    moment decreases along the ladder as nu decreases; this is a Monte Carlo
    trend, stronger than what the limit theorem guarantees.
    """
    uni = Table(["nu", "k", "moment", "ci_low", "ci_high", "ks_uniform", "rayleigh_p", "n", "excluded", "uniform_ok"])
    cor = Table(["nu", "k", "component", "r", "ci_low", "ci_high", "n", "contains_zero"])
    moments = {}
    independent = {}
    for e in ensembles:
        if e.phi is None:
            raise ValueError("theorem-b report needs angle samples")
        u = stats.angle_uniformity(e.phi[:, at, :])
        for k in range(e.m):
            uni.rows.append(
                [e.nu, k + 1, u.moment[k], u.ci_low[k], u.ci_high[k], u.ks[k], u.rayleigh_p[k], int(u.n[k]),
                 int(u.excluded[k]), bool(u.uniform_ok(alpha)[k])]
            )
            moments.setdefault(k + 1, []).append(float(u.moment[k]))
            ok = True
            for name, fn in (("cos", np.cos), ("sin", np.sin)):
                c = stats.correlation(e.I[:, at, k], fn(e.phi[:, at, k]))
                cor.rows.append([e.nu, k + 1, name, c.r, c.low, c.high, c.n, c.contains_zero()])
                ok = ok and c.contains_zero()
            independent[f"nu={e.nu!r},k={k + 1}"] = ok
    summary = {
        "ladder": [e.nu for e in ensembles],
        "moment_decreasing_along_ladder": {f"k={k}": _decreasing(v) for k, v in moments.items()},
        "moment_final": {f"k={k}": v[-1] for k, v in moments.items()},
        "correlation_ci_contains_zero": independent,
    }
    return Report("theorem_b", {"uniformity": uni, "correlation": cor}, summary)


def stationary_stats(ensembles: list[EnsembleSamples], spec: dynamics.NoiseSpec) -> Report:
    """Time-and-ensemble averages against the energy balance ``E |u|_1^2 = B0/2``.

    The standard error uses per-trajectory time averages, which are independent.
    """
    B0 = conserved.noise_constant(spec, 0)
    t = Table(["nu", "mean_norm1_sq", "stderr", "target", "rel_error", "mean_norm0_sq", "n_traj", "n_obs"]
              + [f"mean_I_{k}" for k in range(1, ensembles[0].m + 1)])
    rel = {}
    for e in ensembles:
        h1 = e.extra["norm1"] ** 2
        per = h1.mean(axis=1)
        mean = float(per.mean())
        se = float(per.std(ddof=1) / np.sqrt(per.size)) if per.size > 1 else float("nan")
        r = abs(mean - B0 / 2) / (B0 / 2)
        rel[repr(e.nu)] = r
        t.rows.append(
            [e.nu, mean, se, B0 / 2, r, float((e.extra["norm0"] ** 2).mean()), e.n, e.I.shape[1]]
            + [float(v) for v in e.I.mean(axis=(0, 1))]
        )
    return Report("stationary", {"energy": t}, {"B0": B0, "relative_error": rel})


def write_gap_table(rows: list[dict], path: str | Path) -> None:
    header = list(rows[0]) if rows else ["k"]
    write_csv(path, header, [[r[h] for h in header] for r in rows])


__all__ = [
    "RunConfig",
    "EnsembleSamples",
    "RunData",
    "Report",
    "Table",
    "derived_constants",
    "format_float",
    "load_run",
    "run_ensemble",
    "stationary_stats",
    "theorem_a_report",
    "theorem_b_report",
    "versions",
    "write_gap_table",
]
