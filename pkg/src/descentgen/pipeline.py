"""Fit / sample / evaluate plumbing shared by the CLI and the end-to-end tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import atmosphere as atm
from . import latent
from .dataio import clean_descents, kfold, split
from .errors import EmptyGridError, GridMismatchError, InsufficientDataError
from .fpca import AltitudeGrid, FpcaResult, GappyCurveMatrix, build_grid, curve_matrix, gappy_fpca, interpolate_to_grid
from .generator import PlausibilityBounds, compute_bounds, generate, start_levels
from .metrics import MEASURES, _per_level, build_report, level_matrix
from .physics import AircraftConfig, fl_to_m, infer_drag, nominal_trajectory

log = logging.getLogger(__name__)


def blip_drag(tr, cfg: AircraftConfig) -> np.ndarray:
    """Drag inferred at every blip of a trajectory."""
    dv = None
    if cfg.esf_mode == "exact_profile":
        order = np.argsort(tr.h)
        v_tas = atm.cas_to_tas(tr.v_ias[order], tr.h[order], cfg.isa)
        dv = np.empty(len(tr.h))
        dv[order] = np.gradient(v_tas, tr.h[order])
    return np.atleast_1d(infer_drag(tr.h, tr.rocd, tr.v_ias, tr.mach, cfg, dvtas_dh=dv))


def trajectory_curves(dataset, grid: AltitudeGrid, cfg: AircraftConfig):
    """Drag and CAS curve matrices on ``grid``; trajectories missing the grid are skipped."""
    d_rows, v_rows, masks, ids = [], [], [], []
    for tr in dataset:
        if len(tr) < 2:
            continue
        d_row, m = interpolate_to_grid(tr.h, blip_drag(tr, cfg), grid)
        if not m.any():
            continue
        v_row, _ = interpolate_to_grid(tr.h, tr.v_ias, grid)
        d_rows.append(d_row)
        v_rows.append(v_row)
        masks.append(m)
        ids.append(tr.traj_id)
    if len(ids) < 3:
        raise InsufficientDataError(f"only {len(ids)} trajectories overlap the grid")
    return curve_matrix(d_rows, masks, grid), curve_matrix(v_rows, masks, grid), ids


@dataclass
class FitOutput:
    grid: AltitudeGrid
    fpca_drag: FpcaResult
    fpca_cas: FpcaResult
    model: object
    report: latent.FitReport
    bounds: PlausibilityBounds
    row_ids: list

    @property
    def basis_drag(self):
        return self.fpca_drag.basis

    @property
    def basis_cas(self):
        return self.fpca_cas.basis

    @property
    def weights(self) -> np.ndarray:
        return np.hstack([self.fpca_drag.weights, self.fpca_cas.weights])


def fit_training_set(train, cfg: AircraftConfig, explained_variance: float = 0.8, model: str = "gmm",
                     seed: int = 0, coverage_frac: float = 0.25, grid: AltitudeGrid | None = None,
                     gmm_cfg: latent.GmmConfig = latent.GmmConfig(),
                     nf_cfg: latent.FlowConfig = latent.FlowConfig()) -> FitOutput:
    """Grid, gappy fPCA of drag and CAS, latent model and plausibility bounds."""
    if grid is None:
        grid = build_grid(train, coverage_frac, h_cap=fl_to_m(cfg.max_fl))
    F_D, F_V, ids = trajectory_curves(train, grid, cfg)
    res_D = gappy_fpca(F_D, explained_variance)
    res_V = gappy_fpca(F_V, explained_variance)
    W = np.hstack([res_D.weights, res_V.weights])
    if model == "gmm" and latent.max_components(len(W), W.shape[1]) == 1 and gmm_cfg.max_components is None:
        log.warning("%d training trajectories allow only one mixture component for %d weights",
                    len(W), W.shape[1])
    mdl, rep = latent.fit_latent(model, W, seed, gmm_cfg, nf_cfg)
    return FitOutput(grid, res_D, res_V, mdl, rep, compute_bounds(F_D, F_V), ids)


def prepare(dataset, train_frac=0.8, seed=0, min_rocd_fpm=500.0, const_run=10, const_tol_fpm=25.0):
    """Clean then split (the split happens before any fPCA)."""
    clean = clean_descents(dataset, min_rocd_fpm, const_run, const_tol_fpm)
    train, test = split(clean, train_frac, seed)
    return clean, train, test


def sample_trajectories(fit: FitOutput, test, n: int, seed: int, cfg: AircraftConfig):
    starts = start_levels(test, fit.grid)
    return generate(fit.model, fit.basis_drag, fit.basis_cas, fit.bounds, starts, n, seed, cfg)


def check_on_grid(trajs, grid: AltitudeGrid, tol: float = 1e-6) -> None:
    for tr in trajs:
        if np.min(tr.h) < grid.h_i - tol or np.max(tr.h) > grid.h_f + tol:
            raise GridMismatchError("generated trajectory leaves the fitted altitude grid")


def evaluate(test, gen, grid: AltitudeGrid, cfg: AircraftConfig):
    check_on_grid(gen, grid)
    bada = nominal_trajectory(cfg, grid.levels)
    return build_report(test, gen, bada, grid, cfg)


def rocd_distances(test, gen, grid: AltitudeGrid) -> dict:
    """Mean per-level ROCD distance over all levels, for each measure."""
    tvm, gvm = level_matrix(test, grid, "rocd"), level_matrix(gen, grid, "rocd")
    out = {}
    for m in MEASURES:
        per = _per_level(tvm, gvm, m)
        out[m] = float(np.nanmean(per)) if np.isfinite(per).any() else float("nan")
    return out


SWEEP_FIELDS = ["fold", "variance", "measure", "value"]


def explained_variance_sweep(dataset, cfg: AircraftConfig, variances, folds: int = 5, seed: int = 0,
                             model: str = "gmm", count: int = 1000, coverage_frac: float = 0.25,
                             gmm_cfg=latent.GmmConfig(), nf_cfg=latent.FlowConfig()):
    """k-fold fit / sample / ROCD-distance rows for each explained-variance value."""
    rows = []
    for fold, train, held in kfold(dataset, folds, seed):
        grid = build_grid(train, coverage_frac, h_cap=fl_to_m(cfg.max_fl))
        for v in variances:
            fit = fit_training_set(train, cfg, v, model, seed, grid=grid, gmm_cfg=gmm_cfg, nf_cfg=nf_cfg)
            starts = start_levels(held, grid)
            if starts.size == 0:
                raise EmptyGridError(f"fold {fold}: no held-out trajectory reaches the grid")
            gen, _ = generate(fit.model, fit.basis_drag, fit.basis_cas, fit.bounds, starts, count,
                              seed + fold, cfg)
            for m, val in rocd_distances(held, gen, grid).items():
                rows.append({"fold": fold, "variance": float(v), "measure": m, "value": val})
    return rows
