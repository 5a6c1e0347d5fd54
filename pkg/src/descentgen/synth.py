"""Synthetic fleet with known ground truth, standing in for radar data.

Curves come from a known mean + orthonormal-mode model with latent weights drawn
from a Gaussian mixture. Each trajectory is flown through the descent integrator,
so the emitted blips obey the same energy balance that drag inference inverts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import atmosphere as atm
from .dataio import Dataset, Trajectory
from .errors import DomainError, NonDescendingProfileError, SpecInvalidError
from .fpca import H_INITIAL, AltitudeGrid
from .physics import AircraftConfig, DescentProfile, integrate_descent, profile_rocd


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple
    cov: tuple  # nested rows


@dataclass(frozen=True)
class SynthTruthSpec:
    grid: AltitudeGrid
    mean_drag: np.ndarray
    mean_cas: np.ndarray
    modes_drag: np.ndarray  # n_g x a
    modes_cas: np.ndarray  # n_g x b
    latent: tuple[MixtureComponent, ...]
    noise_ias: float = 0.0
    noise_rocd: float = 0.0
    complete_frac: float = 1.0
    max_truncation: float = 0.0  # largest fraction of levels removed from the top
    n_trajectories: int = 100
    seed: int = 0
    aircraft_type: str = "SYN"

    def __post_init__(self):
        n_g = len(self.grid)
        for name in ("mean_drag", "mean_cas"):
            if np.shape(getattr(self, name)) != (n_g,):
                raise SpecInvalidError(f"{name} must have one value per grid level")
        for name in ("modes_drag", "modes_cas"):
            m = np.asarray(getattr(self, name))
            if m.ndim != 2 or m.shape[0] != n_g:
                raise SpecInvalidError(f"{name} must be n_g x n_modes")
            if np.max(np.abs(m.T @ m - np.eye(m.shape[1]))) > 1e-10:
                raise SpecInvalidError(f"{name} columns are not orthonormal")
        dim = self.modes_drag.shape[1] + self.modes_cas.shape[1]
        if not self.latent or abs(sum(c.weight for c in self.latent) - 1.0) > 1e-10:
            raise SpecInvalidError("latent mixture weights must sum to 1")
        for comp in self.latent:
            if len(comp.mean) != dim or np.shape(comp.cov) != (dim, dim):
                raise SpecInvalidError("latent component has the wrong dimension")
        if self.noise_ias < 0 or self.noise_rocd < 0:
            raise SpecInvalidError("noise levels must be non-negative")
        if not 0.0 <= self.complete_frac <= 1.0 or not 0.0 <= self.max_truncation < 1.0:
            raise SpecInvalidError("gap model fractions out of range")

    @property
    def n_alpha(self) -> int:
        return self.modes_drag.shape[1]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(), "mean_drag": self.mean_drag, "mean_cas": self.mean_cas,
            "modes_drag": self.modes_drag, "modes_cas": self.modes_cas,
            "latent": [{"weight": c.weight, "mean": list(c.mean), "cov": [list(r) for r in c.cov]}
                       for c in self.latent],
            "noise_ias": self.noise_ias, "noise_rocd": self.noise_rocd,
            "complete_frac": self.complete_frac, "max_truncation": self.max_truncation,
            "n_trajectories": self.n_trajectories, "seed": self.seed,
            "aircraft_type": self.aircraft_type,
        }


@dataclass
class SynthTruth:
    weights: np.ndarray  # n x (a + b)
    component: np.ndarray
    top_index: np.ndarray  # highest observed grid level per trajectory
    drag: np.ndarray  # true curves, n x n_g
    cas: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("weights", "component", "top_index", "drag", "cas")}


def smooth_modes(n_levels: int, n_modes: int) -> np.ndarray:
    """Orthonormal polynomial modes (discrete Legendre) over ``n_levels`` points."""
    x = np.linspace(-1.0, 1.0, n_levels)
    V = np.polynomial.legendre.legvander(x, n_modes - 1)
    q, _ = np.linalg.qr(V)
    pivot = np.argmax(np.abs(q), axis=0)
    return q * np.sign(q[pivot, np.arange(n_modes)])


def draw_latent(spec: SynthTruthSpec, n: int, rng: np.random.Generator):
    w = np.array([c.weight for c in spec.latent])
    comp = rng.choice(len(w), size=n, p=w)
    dim = len(spec.latent[0].mean)
    out = np.zeros((n, dim))
    for k, c in enumerate(spec.latent):
        sel = comp == k
        cov = np.asarray(c.cov, dtype=float)
        vals, vecs = np.linalg.eigh(cov)
        root = vecs * np.sqrt(np.maximum(vals, 0.0))
        out[sel] = np.asarray(c.mean) + rng.standard_normal((int(sel.sum()), dim)) @ root.T
    return out, comp


def synth_curves(spec: SynthTruthSpec):
    """True drag/CAS curves, latent draws and top-truncation indices (no physics)."""
    rng = np.random.default_rng(spec.seed)
    n, n_g = spec.n_trajectories, len(spec.grid)
    w, comp = draw_latent(spec, n, rng)
    a = spec.n_alpha
    drag = spec.mean_drag + w[:, :a] @ spec.modes_drag.T
    cas = spec.mean_cas + w[:, a:] @ spec.modes_cas.T
    gappy = rng.random(n) >= spec.complete_frac
    cut = np.floor(rng.random(n) * spec.max_truncation * n_g).astype(int)
    top = np.where(gappy, n_g - 1 - cut, n_g - 1)
    top = np.maximum(top, 1)
    return SynthTruth(w, comp, top, drag, cas)


def synth_generate(spec: SynthTruthSpec, cfg: AircraftConfig):
    """Blip dataset plus hidden truth. One blip per grid level from the top of descent down."""
    truth = synth_curves(spec)
    rng = np.random.default_rng([spec.seed, 1])
    levels = spec.grid.levels
    c = cfg.isa
    trajs = []
    for k in range(spec.n_trajectories):
        try:
            prof = DescentProfile(levels, truth.drag[k], truth.cas[k])
            if np.any(profile_rocd(prof, cfg, c) >= 0):
                raise NonDescendingProfileError("profile climbs")
            sim = integrate_descent(prof, float(levels[truth.top_index[k]]), cfg, c)
        except (DomainError, NonDescendingProfileError) as exc:
            raise SpecInvalidError(f"synthetic trajectory {k} is not a valid descent: {exc}") from None
        ias = sim.v_cas + spec.noise_ias * rng.standard_normal(len(sim))
        rocd = sim.rocd + spec.noise_rocd * rng.standard_normal(len(sim))
        mach = atm.mach_number(atm.cas_to_tas(np.maximum(ias, 0.0), sim.h, c), sim.h, c)
        trajs.append(Trajectory(f"{spec.aircraft_type}-{k:05d}", spec.aircraft_type,
                                sim.t.copy(), sim.h.copy(), rocd, ias, np.asarray(mach)))
    return Dataset(trajs), truth


def default_truth_spec(cfg: AircraftConfig, n_trajectories: int = 500, seed: int = 0,
                       top_fl: float | None = None, noise_ias: float = 0.0, noise_rocd: float = 0.0,
                       complete_frac: float = 0.6, max_truncation: float = 0.6,
                       bimodal: bool = True) -> SynthTruthSpec:
    """A jet-like fleet: 3 drag modes, 2 CAS modes, optionally bimodal CAS offsets."""
    top_fl = top_fl or cfg.max_fl
    n_g = int(np.floor((top_fl * 30.48 - H_INITIAL) / 30.48 + 1e-9)) + 1
    grid = AltitudeGrid(H_INITIAL, n_g)
    h = grid.levels
    x = (h - h[0]) / (h[-1] - h[0])
    c = cfg.isa
    # drag falls with altitude; CAS is flat below the crossover and Mach-limited above
    mean_drag = cfg.mass * c.g0 / 15.0 * (1.0 - 0.15 * x)
    mach_cas = atm.tas_to_cas(cfg.mach_ref * atm.speed_of_sound(h, c), h, c)
    mean_cas = np.minimum(0.97 * cfg.cas_ref, mach_cas)
    md = smooth_modes(n_g, 3)
    mv = smooth_modes(n_g, 2)
    root = np.sqrt(n_g)
    sd_drag = np.array([2200.0, 900.0, 500.0]) * root
    sd_cas = np.array([3.0, 1.5]) * root
    dim = 5
    if bimodal:
        off = 5.0 * root
        comps = []
        for sgn in (-1.0, 1.0):
            mean = np.zeros(dim)
            mean[3] = sgn * off
            mean[0] = sgn * 0.5 * sd_drag[0]
            cov = np.diag(np.concatenate([sd_drag, sd_cas]) ** 2)
            cov[0, 0] *= 0.75
            comps.append(MixtureComponent(0.5, tuple(mean), tuple(map(tuple, cov))))
    else:
        cov = np.diag(np.concatenate([sd_drag, sd_cas]) ** 2)
        comps = [MixtureComponent(1.0, tuple(np.zeros(dim)), tuple(map(tuple, cov)))]
    return SynthTruthSpec(grid, mean_drag, mean_cas, md, mv, tuple(comps), noise_ias, noise_rocd,
                          complete_frac, max_truncation, n_trajectories, seed, cfg.type_code)


def point_mass_spec(spec: SynthTruthSpec) -> SynthTruthSpec:
    """Same fleet collapsed to a single latent point at the origin (all curves = means)."""
    dim = len(spec.latent[0].mean)
    comp = MixtureComponent(1.0, tuple(np.zeros(dim)), tuple(map(tuple, np.zeros((dim, dim)))))
    return replace(spec, latent=(comp,))
