"""Discrete functional PCA of altitude-indexed curves with gap imputation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyGridError, InsufficientDataError
from .physics import FL, DescentProfile

log = logging.getLogger(__name__)

H_INITIAL = 150 * FL  # FL150 = 4572 m
_LEVEL_TOL = 1e-6


@dataclass(frozen=True)
class AltitudeGrid:
    h_i: float
    n_levels: int
    delta_h: float = FL

    def __post_init__(self):
        if self.n_levels < 2:
            raise DomainError("grid needs at least two levels")

    @property
    def levels(self) -> np.ndarray:
        return self.h_i + np.arange(self.n_levels) * self.delta_h

    @property
    def h_f(self) -> float:
        return float(self.levels[-1])

    def __len__(self):
        return self.n_levels

    def index_at_or_below(self, h: float) -> int:
        k = int(math.floor((h - self.h_i) / self.delta_h + 1e-9))
        return min(max(k, 0), self.n_levels - 1)

    def to_dict(self) -> dict:
        return {"h_i": self.h_i, "n_levels": self.n_levels, "delta_h": self.delta_h}

    @classmethod
    def from_dict(cls, d) -> "AltitudeGrid":
        return cls(float(d["h_i"]), int(d["n_levels"]), float(d["delta_h"]))


def build_grid(trajs, coverage_frac: float = 0.25, h_i: float = H_INITIAL,
               delta_h: float = FL, h_cap: float | None = None) -> AltitudeGrid:
    """Grid from ``h_i`` up to the highest level spanned by ``coverage_frac`` of ``trajs``.

    ``trajs`` are objects with an altitude array ``h``. ``h_cap`` (e.g. the type's
    maximum flight level) bounds the top of the grid.
    """
    trajs = list(trajs)
    if not trajs:
        raise EmptyGridError("no trajectories to build a grid from")
    if not 0.0 < coverage_frac <= 1.0:
        raise DomainError("coverage_frac must lie in (0, 1]")
    lo = np.array([np.min(t.h) for t in trajs])
    hi = np.array([np.max(t.h) for t in trajs])
    if not np.any(hi >= h_i - _LEVEL_TOL):
        raise EmptyGridError(f"no trajectory reaches h_i = {h_i:.1f} m")
    top = hi.max() if h_cap is None else min(hi.max(), h_cap)
    n_cand = int(math.floor((top - h_i) / delta_h + 1e-9)) + 1
    levels = h_i + np.arange(n_cand) * delta_h
    covered = (lo[:, None] <= levels + _LEVEL_TOL) & (hi[:, None] >= levels - _LEVEL_TOL)
    frac = covered.mean(axis=0)
    ok = np.nonzero(frac >= coverage_frac - 1e-12)[0]
    if len(ok) == 0 or ok.max() < 1:
        raise EmptyGridError("too few trajectories cover more than one grid level")
    return AltitudeGrid(h_i, int(ok.max()) + 1, delta_h)


@dataclass
class GappyCurveMatrix:
    values: np.ndarray  # n_t x n_g, zero where unobserved
    mask: np.ndarray  # True = observed
    grid: AltitudeGrid

    def __post_init__(self):
        self.values = np.where(self.mask, self.values, 0.0)
        if self.values.shape != self.mask.shape or self.values.shape[1] != len(self.grid):
            raise DomainError("curve matrix shape does not match the grid")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def observed_mean(self) -> np.ndarray:
        n = self.mask.sum(axis=0)
        s = self.values.sum(axis=0)
        return np.divide(s, n, out=np.zeros_like(s), where=n > 0)

    def subset(self, rows) -> "GappyCurveMatrix":
        return GappyCurveMatrix(self.values[rows], self.mask[rows], self.grid)


def interpolate_to_grid(h, values, grid: AltitudeGrid):
    """Linear interpolation of one trajectory quantity onto ``grid`` inside its altitude span."""
    h = np.asarray(h, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(h) < 2:
        raise DomainError("need at least two blips to interpolate")
    order = np.argsort(h, kind="stable")
    h, values = h[order], values[order]
    levels = grid.levels
    mask = (levels >= h[0] - _LEVEL_TOL) & (levels <= h[-1] + _LEVEL_TOL)
    row = np.zeros(len(levels))
    if mask.any():
        row[mask] = np.interp(levels[mask], h, values)
    return row, mask


def curve_matrix(rows, masks, grid: AltitudeGrid) -> GappyCurveMatrix:
    return GappyCurveMatrix(np.array(rows, dtype=float).reshape(-1, len(grid)),
                            np.array(masks, dtype=bool).reshape(-1, len(grid)), grid)


def pairwise_covariance(F: GappyCurveMatrix) -> np.ndarray:
    """Pairwise-complete covariance; pairs with fewer than two co-observations are 0."""
    m = F.mask.astype(float)
    xc = (F.values - F.observed_mean()) * m
    s = xc.T @ xc
    n = m.T @ m
    return np.divide(s, n - 1.0, out=np.zeros_like(s), where=n >= 2)


def sample_covariance(X: np.ndarray) -> np.ndarray:
    xc = X - X.mean(axis=0)
    return xc.T @ xc / (X.shape[0] - 1)


def eigen_modes(C: np.ndarray):
    """Eigenpairs sorted by decreasing eigenvalue, negatives clamped, sign-fixed."""
    C = np.asarray(C, dtype=float)
    scale = max(np.max(np.abs(C)), 1e-300)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or np.max(np.abs(C - C.T)) > 1e-10 * scale:
        raise DomainError("covariance matrix must be square and symmetric")
    lam, vec = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(lam)[::-1]
    lam, vec = np.maximum(lam[order], 0.0), vec[:, order]
    pivot = np.argmax(np.abs(vec), axis=0)
    signs = np.sign(vec[pivot, np.arange(vec.shape[1])])
    signs[signs == 0] = 1.0
    return vec * signs, lam


def truncate_modes(eigenvalues, target_var: float) -> int:
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    if not total > 0:
        raise DomainError("eigenvalues sum to zero")
    frac = np.cumsum(lam) / total
    n = int(np.searchsorted(frac, target_var - 1e-12)) + 1
    return max(1, min(n, len(lam)))


def fit_weights_batch(values, mask, mean, modes):
    """Least-squares mode weights over observed entries, for many rows at once.

    Modes enter one at a time and each step minimises the squared residual over
    all weights introduced so far; the returned weights are those of the final
    step, i.e. the joint least-squares fit on the observed entries. On complete
    rows this is the orthogonal projection ``(row - mean) @ modes``.
    A mode with no observed support in a row gets weight 0.
    """
    values = np.atleast_2d(values)
    m = np.atleast_2d(mask).astype(float)
    modes = np.asarray(modes, dtype=float).reshape(len(mean), -1)
    n_rows, n_modes = values.shape[0], modes.shape[1]
    resid = (values - mean) * m
    support = m @ modes**2
    dead = support <= 0
    if dead.any():
        log.warning("%d row/mode pairs have no observed support; weights set to 0", int(dead.sum()))
    gram = np.einsum("rg,gi,gj->rij", m, modes, modes)
    rhs = resid @ modes
    # decouple unsupported modes so the normal equations stay solvable
    idx = np.nonzero(dead)
    gram[idx[0], idx[1], :] = 0.0
    gram[idx[0], :, idx[1]] = 0.0
    gram[idx[0], idx[1], idx[1]] = 1.0
    rhs[dead] = 0.0
    w = np.zeros((n_rows, n_modes))
    try:
        w[:] = np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        for r in range(n_rows):
            w[r] = np.linalg.lstsq(gram[r], rhs[r], rcond=None)[0]
    return w


def fit_weights_sequential(row, mask, mean, modes, n_modes: int):
    row = np.asarray(row, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < n_modes:
        raise InsufficientDataError("fewer observed entries than modes")
    modes = np.asarray(modes)[:, :n_modes]
    return fit_weights_batch(row[None], mask[None], mean, modes)[0]


@dataclass(frozen=True)
class FpcaBasis:
    grid: AltitudeGrid
    mean: np.ndarray
    modes: np.ndarray  # n_g x n_modes
    eigenvalues: np.ndarray
    explained_variance: float
    all_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    def curves(self, weights) -> np.ndarray:
        """Curves (rows) for a weight matrix; a single weight vector gives one curve."""
        w = np.asarray(weights, dtype=float)
        if w.shape[-1] != self.n_modes:
            raise DomainError(f"expected {self.n_modes} weights, got {w.shape[-1]}")
        return self.mean + w @ self.modes.T

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "mean": self.mean.tolist(),
            "modes": self.modes.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance": self.explained_variance,
            "all_eigenvalues": self.all_eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "FpcaBasis":
        grid = AltitudeGrid.from_dict(d["grid"])
        return cls(grid, np.array(d["mean"], dtype=float),
                   np.array(d["modes"], dtype=float).reshape(len(grid), -1),
                   np.array(d["eigenvalues"], dtype=float), float(d["explained_variance"]),
                   np.array(d["all_eigenvalues"], dtype=float))


@dataclass(frozen=True)
class WeightVector:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))):
            raise DomainError("weights must be finite")

    @classmethod
    def split(cls, w, n_alpha: int) -> "WeightVector":
        w = np.asarray(w, dtype=float)
        return cls(w[:n_alpha], w[n_alpha:])


@dataclass
class FpcaResult:
    basis: FpcaBasis
    weights: np.ndarray
    iterations: int
    completed: np.ndarray  # data matrix with missing entries imputed
    changes: list


def _n_keep(lam, target_var, n_modes):
    if n_modes:
        return n_modes
    # identical curves have no variance to explain; keep one (zero-variance) mode
    return truncate_modes(lam, target_var) if lam.sum() > 0 else 1


def gappy_fpca(F: GappyCurveMatrix, target_var: float = 0.8, tol: float = 0.01,
               patience: int = 10, max_iter: int = 50, n_modes: int | None = None) -> FpcaResult:
    """Iterative gappy fPCA: covariance, eigenmodes, weights, imputation, repeat.

    The first covariance is pairwise-complete over observed entries; later ones use
    the imputed matrix. Imputation uses the modes retained at ``target_var`` (or a
    fixed ``n_modes``). Iteration stops once the mean relative change of the
    imputed entries has stayed below ``tol`` for ``patience`` consecutive
    iterations, or after ``max_iter``.
    """
    if F.n_rows < 3:
        raise InsufficientDataError("gappy fPCA needs at least three curves")
    if not 0.0 < target_var <= 1.0:
        raise DomainError("target_var must lie in (0, 1]")
    missing = ~F.mask
    filled = np.where(F.mask, F.values, F.observed_mean())
    changes: list[float] = []
    streak = 0
    it = 0
    for it in range(1, max_iter + 1):
        if it == 1:
            mean, C = F.observed_mean(), pairwise_covariance(F)
        else:
            mean, C = filled.mean(axis=0), sample_covariance(filled)
        modes, lam = eigen_modes(C)
        if not missing.any():
            break
        r = _n_keep(lam, target_var, n_modes)
        w = fit_weights_batch(F.values, F.mask, mean, modes[:, :r])
        recon = mean + w @ modes[:, :r].T
        old = filled[missing]
        new = recon[missing]
        change = float(np.mean(np.abs(new - old) / np.maximum(np.abs(old), 1e-6)))
        changes.append(change)
        filled[missing] = new
        streak = streak + 1 if change < tol else 0
        if streak >= patience:
            break

    mean, C = filled.mean(axis=0), sample_covariance(filled)
    modes, lam = eigen_modes(C)
    r = _n_keep(lam, target_var, n_modes)
    weights = fit_weights_batch(F.values, F.mask, mean, modes[:, :r])
    total = lam.sum()
    basis = FpcaBasis(F.grid, mean, modes[:, :r], lam[:r],
                      float(lam[:r].sum() / total) if total > 0 else 1.0, lam)
    return FpcaResult(basis, weights, it, filled, changes)


def reconstruct(weights: WeightVector, basis_D: FpcaBasis, basis_V: FpcaBasis) -> DescentProfile:
    if len(weights.alpha) != basis_D.n_modes or len(weights.beta) != basis_V.n_modes:
        raise DomainError("weight lengths do not match the bases")
    return DescentProfile(basis_D.grid.levels, basis_D.curves(weights.alpha),
                          basis_V.curves(weights.beta))
