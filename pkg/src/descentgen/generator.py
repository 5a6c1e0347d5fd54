"""Sampling pipeline: latent draw, curve reconstruction, plausibility rejection,
start-level draw and descent integration."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import latent
from .errors import DataFormatError, DomainError, EmptySubsetError, GenerationStalledError, GridMismatchError
from .fpca import AltitudeGrid, FpcaBasis, GappyCurveMatrix
from .physics import RATE_EPS, AircraftConfig, DescentProfile, SimulatedTrajectory, integrate_descent, profile_rocd

log = logging.getLogger(__name__)

LOWER_FACTOR = 0.95
UPPER_FACTOR = 1.05
MAX_ATTEMPTS = 1000
CAUSES = ("bounds-drag", "bounds-cas", "non-descending")
TRAJ_HEADER = ["traj_id", "t_s", "h_m", "v_cas_mps", "v_tas_mps", "rocd_mps", "drag_n"]


@dataclass(frozen=True)
class PlausibilityBounds:
    grid: AltitudeGrid
    drag_lo: np.ndarray
    drag_hi: np.ndarray
    cas_lo: np.ndarray
    cas_hi: np.ndarray

    def __post_init__(self):
        for lo, hi in ((self.drag_lo, self.drag_hi), (self.cas_lo, self.cas_hi)):
            if len(lo) != len(self.grid) or len(hi) != len(self.grid):
                raise GridMismatchError("bounds do not match the grid")
            if np.any(lo >= hi):
                raise DomainError("lower bound must be below upper bound at every level")

    def drag_ok(self, values) -> bool:
        return bool(np.all((values >= self.drag_lo) & (values <= self.drag_hi)))

    def cas_ok(self, values) -> bool:
        return bool(np.all((values >= self.cas_lo) & (values <= self.cas_hi)))

    def to_dict(self):
        return {"grid": self.grid.to_dict(), "drag_lo": self.drag_lo, "drag_hi": self.drag_hi,
                "cas_lo": self.cas_lo, "cas_hi": self.cas_hi}

    @classmethod
    def from_dict(cls, d):
        a = lambda k: np.asarray(d[k], dtype=float)  # noqa: E731
        return cls(AltitudeGrid.from_dict(d["grid"]), a("drag_lo"), a("drag_hi"), a("cas_lo"), a("cas_hi"))


def _level_extremes(F: GappyCurveMatrix, what: str):
    observed = F.mask.any(axis=0)
    if not observed.any():
        raise EmptySubsetError(f"no observed {what} values to bound")
    lo = np.where(F.mask, F.values, np.inf).min(axis=0)
    hi = np.where(F.mask, F.values, -np.inf).max(axis=0)
    if not observed.all():
        idx = np.flatnonzero(observed)
        missing = np.flatnonzero(~observed)
        log.warning("%d grid levels have no observed %s; copying bounds from the nearest observed level",
                    len(missing), what)
        near = idx[np.argmin(np.abs(missing[:, None] - idx[None, :]), axis=1)]
        lo[missing], hi[missing] = lo[near], hi[near]
    return lo, hi


def compute_bounds(F_D: GappyCurveMatrix, F_V: GappyCurveMatrix) -> PlausibilityBounds:
    """Per-level 0.95 x observed minimum and 1.05 x observed maximum."""
    if F_D.grid != F_V.grid:
        raise GridMismatchError("drag and CAS matrices use different grids")
    d_lo, d_hi = _level_extremes(F_D, "drag")
    v_lo, v_hi = _level_extremes(F_V, "CAS")
    return PlausibilityBounds(F_D.grid, LOWER_FACTOR * d_lo, UPPER_FACTOR * d_hi,
                              LOWER_FACTOR * v_lo, UPPER_FACTOR * v_hi)


def start_levels(dataset, grid: AltitudeGrid) -> np.ndarray:
    """Top-of-descent altitude of each trajectory, snapped down to a grid level.

    Trajectories starting below the grid floor are skipped.
    """
    tops = [float(np.max(tr.h)) for tr in dataset]
    levels = grid.levels
    return np.array([levels[grid.index_at_or_below(h)] for h in tops if h >= grid.h_i - 1e-6])


def sample_initial_level(starts, seed) -> float:
    """One draw from the empirical distribution of test start levels."""
    starts = np.asarray(starts, dtype=float)
    if starts.size == 0:
        raise EmptySubsetError("no test trajectories to draw a start level from")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return float(starts[rng.integers(len(starts))])


@dataclass
class GenerationReport:
    requested: int
    accepted: int = 0
    rejected: int = 0
    seed: int = 0
    rejections: dict = field(default_factory=lambda: {c: 0 for c in CAUSES})

    @property
    def total_draws(self) -> int:
        return self.accepted + self.rejected

    @property
    def resample_rate(self) -> float:
        return self.rejected / self.total_draws if self.total_draws else 0.0

    def to_dict(self):
        return {"requested": self.requested, "accepted": self.accepted, "rejected": self.rejected,
                "total_draws": self.total_draws, "resample_rate": self.resample_rate,
                "seed": self.seed, "rejections": dict(self.rejections)}


def check_profile(drag, cas, bounds: PlausibilityBounds, cfg: AircraftConfig):
    """Return the rejection cause for a reconstructed (drag, CAS) pair, or None."""
    if not bounds.drag_ok(drag):
        return "bounds-drag"
    if not bounds.cas_ok(cas):
        return "bounds-cas"
    prof = DescentProfile(bounds.grid.levels, drag, cas)
    if np.any(profile_rocd(prof, cfg) >= -RATE_EPS):
        return "non-descending"
    return None


def _check_compatible(model, basis_D: FpcaBasis, basis_V: FpcaBasis, bounds: PlausibilityBounds):
    if basis_D.grid != basis_V.grid or basis_D.grid != bounds.grid:
        raise GridMismatchError("bases and bounds were built on different grids")
    if model.dim != basis_D.n_modes + basis_V.n_modes:
        raise GridMismatchError(
            f"latent model has dimension {model.dim}, bases need {basis_D.n_modes + basis_V.n_modes}")


def generate(model, basis_D: FpcaBasis, basis_V: FpcaBasis, bounds: PlausibilityBounds,
             starts, n: int, seed: int, cfg: AircraftConfig, max_attempts: int = MAX_ATTEMPTS):
    """Generate ``n`` accepted trajectories.

    Sample ``i`` uses its own random streams derived from ``(seed, i)``, so the
    output does not depend on evaluation order. Each rejected latent draw counts
    once, under the first failing check.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    _check_compatible(model, basis_D, basis_V, bounds)
    starts = np.asarray(starts, dtype=float)
    if starts.size == 0:
        raise EmptySubsetError("no start levels to sample from")
    a = basis_D.n_modes
    levels = bounds.grid.levels
    report = GenerationReport(n, seed=seed)
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, i, 0])
        causes = {c: 0 for c in CAUSES}
        for attempt in range(max_attempts):
            w = latent.sample(model, 1, rng)[0]
            drag = basis_D.curves(w[:a])
            cas = basis_V.curves(w[a:])
            cause = check_profile(drag, cas, bounds, cfg)
            if cause is None:
                break
            causes[cause] += 1
        else:
            raise GenerationStalledError(
                f"sample {i}: {max_attempts} consecutive draws rejected "
                f"(drag bounds {causes['bounds-drag']}, CAS bounds {causes['bounds-cas']}, "
                f"non-descending {causes['non-descending']})",
                diagnostics={"sample": i, "attempts": max_attempts, "causes": causes,
                             "accepted_before_stall": report.accepted})
        for c, k in causes.items():
            report.rejections[c] += k
        report.rejected += sum(causes.values())
        report.accepted += 1
        h_start = sample_initial_level(starts, np.random.default_rng([seed, i, 1]))
        prof = DescentProfile(levels, drag, cas)
        out.append(integrate_descent(prof, h_start, cfg))
    return out, report


def write_trajectories(path, trajs, prefix: str = "gen") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJ_HEADER)
        for k, tr in enumerate(trajs):
            tid = f"{prefix}-{k:05d}"
            for row in zip(tr.t, tr.h, tr.v_cas, tr.v_tas, tr.rocd, tr.drag):
                w.writerow([tid, *(repr(float(x)) for x in row)])


def read_trajectories(path) -> list[SimulatedTrajectory]:
    groups: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJ_HEADER:
            raise DataFormatError(f"{path}: header must be {','.join(TRAJ_HEADER)}")
        for row in reader:
            if row:
                groups.setdefault(row[0], []).append([float(x) for x in row[1:]])
    return [SimulatedTrajectory(*np.array(rows).T.copy()) for rows in groups.values()]
