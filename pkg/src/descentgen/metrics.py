"""Distribution distances between generated and held-out trajectories.

All reported distances are exact ECDF computations. The KDE is only used to emit
smooth curves for plotting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptySubsetError
from .fpca import AltitudeGrid, interpolate_to_grid

QUANTITIES = ("cas", "rocd")
MEASURES = ("ks", "w1", "mae")
SPAN_TOL = 1e-6
BADA_B738_TTB_MAE = 166.0  # s, published reference for the nominal baseline; documentation only


def _samples(x, name="samples"):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise DomainError(f"{name} must be non-empty")
    return x


def ks_distance(a, b) -> float:
    """Largest gap between the two empirical CDFs over all step points."""
    a, b = np.sort(_samples(a, "a")), np.sort(_samples(b, "b"))
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def wasserstein1(a, b) -> float:
    """Integral of |ECDF_a - ECDF_b| over the merged support."""
    a, b = np.sort(_samples(a, "a")), np.sort(_samples(b, "b"))
    pts = np.sort(np.concatenate([a, b]))
    fa = np.searchsorted(a, pts[:-1], side="right") / a.size
    fb = np.searchsorted(b, pts[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * np.diff(pts)))


def mae_of_means(a, b) -> float:
    return float(abs(np.mean(_samples(a, "a")) - np.mean(_samples(b, "b"))))


MEASURE_FUNCS = {"ks": ks_distance, "w1": wasserstein1, "mae": mae_of_means}


@dataclass(frozen=True)
class DistanceTriple:
    ks: float
    wasserstein: float
    mae: float

    @classmethod
    def between(cls, a, b) -> "DistanceTriple":
        return cls(ks_distance(a, b), wasserstein1(a, b), mae_of_means(a, b))

    def get(self, measure: str) -> float:
        return {"ks": self.ks, "w1": self.wasserstein, "mae": self.mae}[measure]

    def to_dict(self):
        return {"ks": self.ks, "w1": self.wasserstein, "mae": self.mae}


def spans_grid(tr, grid: AltitudeGrid) -> bool:
    return bool(np.min(tr.h) <= grid.h_i + SPAN_TOL and np.max(tr.h) >= grid.h_f - SPAN_TOL)


def descent_time(tr, grid: AltitudeGrid) -> float:
    """Elapsed time from the grid top to the grid floor, interpolated in altitude."""
    order = np.argsort(tr.h, kind="stable")
    h, t = np.asarray(tr.h)[order], np.asarray(tr.t)[order]
    return float(np.interp(grid.h_i, h, t) - np.interp(grid.h_f, h, t))


def time_to_bottom_distribution(trajs, grid: AltitudeGrid) -> np.ndarray:
    """Time to bottom of descent for the trajectories that span the whole grid."""
    trajs = list(trajs)
    if not trajs:
        raise DomainError("no trajectories given")
    out = [descent_time(tr, grid) for tr in trajs if spans_grid(tr, grid)]
    if not out:
        raise EmptySubsetError("no trajectory spans the grid")
    return np.array(out)


def _quantity(tr, quantity: str):
    if quantity == "cas":
        return tr.v_cas if hasattr(tr, "v_cas") else tr.v_ias
    if quantity == "rocd":
        return tr.rocd
    raise DomainError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")


def level_matrix(trajs, grid: AltitudeGrid, quantity: str):
    """(values, mask) of a quantity interpolated to grid levels inside each trajectory's span."""
    rows, masks = [], []
    for tr in trajs:
        r, m = interpolate_to_grid(tr.h, _quantity(tr, quantity), grid)
        rows.append(r)
        masks.append(m)
    if not rows:
        raise DomainError("no trajectories given")
    return np.array(rows), np.array(masks)


def _split_means(per_level, levels, h_trans):
    """Mean over levels strictly above and at-or-below ``h_trans``; None where a side is empty."""
    per_level = np.asarray(per_level, dtype=float)
    ok = np.isfinite(per_level)
    above = ok & (levels > h_trans)
    below = ok & (levels <= h_trans)
    mean = lambda sel: float(per_level[sel].mean()) if sel.any() else None  # noqa: E731
    return mean(above), mean(below)


def _per_level(test_vm, gen_vm, measure: str):
    tv, tm = test_vm
    gv, gm = gen_vm
    f = MEASURE_FUNCS[measure]
    out = np.full(tv.shape[1], np.nan)
    for k in range(tv.shape[1]):
        a, b = tv[tm[:, k], k], gv[gm[:, k], k]
        if a.size and b.size:
            out[k] = f(b, a)
    return out


def per_level_distance(test, gen, grid: AltitudeGrid, quantity: str, measure: str, h_trans: float):
    """(above, below) mean per-level distance; a side with no usable level is None.

    Each level only uses trajectories whose altitude span covers it.
    """
    if measure not in MEASURE_FUNCS:
        raise DomainError(f"unknown measure {measure!r}; expected one of {MEASURES}")
    test, gen = list(test), list(gen)
    if not test or not gen:
        raise DomainError("test and generated sets must be non-empty")
    per = _per_level(level_matrix(test, grid, quantity), level_matrix(gen, grid, quantity), measure)
    return _split_means(per, grid.levels, h_trans)


def scott_bandwidth(x) -> float:
    x = _samples(x)
    sd = float(np.std(x, ddof=1))
    if sd <= 0.0:
        return 1e-6 * max(float(np.max(np.abs(x))), 1.0)
    return sd * x.size ** (-0.2)


def kde_pdf(samples, eval_grid) -> np.ndarray:
    """Gaussian-kernel density with Scott's bandwidth."""
    x = _samples(samples)
    if x.size < 2:
        raise DomainError("KDE needs at least two samples")
    bw = scott_bandwidth(x)
    g = np.asarray(eval_grid, dtype=float)
    u = (g[..., None] - x) / bw
    return np.exp(-0.5 * u * u).sum(axis=-1) / (x.size * bw * math.sqrt(2 * math.pi))


def ecdf(x):
    x = np.sort(_samples(x))
    return x, np.arange(1, x.size + 1) / x.size


# -- report ---------------------------------------------------------------------

@dataclass
class MetricsReport:
    aircraft_type: str
    transition_altitude_used: float
    time_to_bottom: DistanceTriple | None
    ttb_bada_mae: float | None
    levels: dict = field(default_factory=dict)  # (quantity, side) -> DistanceTriple | None
    bada_level_mae: dict = field(default_factory=dict)  # (quantity, side) -> float | None
    n_test: int = 0
    n_gen: int = 0
    n_test_spanning: int = 0
    n_gen_spanning: int = 0

    def rows(self):
        """Flat rows: aircraft, quantity, measure, value (blank when absent)."""
        out = []
        cells = [("time_to_bottom", self.time_to_bottom, self.ttb_bada_mae)]
        for q in QUANTITIES:
            for side in ("above", "below"):
                cells.append((f"{q}_{side}", self.levels.get((q, side)), self.bada_level_mae.get((q, side))))
        for name, triple, bada in cells:
            for m in MEASURES:
                out.append({"aircraft": self.aircraft_type, "quantity": name, "measure": m,
                            "value": None if triple is None else triple.get(m)})
            out.append({"aircraft": self.aircraft_type, "quantity": name, "measure": "bada_mae",
                        "value": bada})
        return out

    def to_dict(self):
        return {
            "aircraft_type": self.aircraft_type,
            "transition_altitude_used": self.transition_altitude_used,
            "time_to_bottom": self.time_to_bottom.to_dict() if self.time_to_bottom else None,
            "ttb_bada_mae": self.ttb_bada_mae,
            "levels": {f"{q}_{s}": (t.to_dict() if t else None) for (q, s), t in self.levels.items()},
            "bada_level_mae": {f"{q}_{s}": v for (q, s), v in self.bada_level_mae.items()},
            "n_test": self.n_test, "n_gen": self.n_gen,
            "n_test_spanning": self.n_test_spanning, "n_gen_spanning": self.n_gen_spanning,
        }


REPORT_FIELDS = ["aircraft", "quantity", "measure", "value"]


def build_report(test, gen, bada, grid: AltitudeGrid, cfg) -> MetricsReport:
    """Time-to-bottom and per-level distances; the deterministic baseline gets MAE only."""
    test, gen = list(test), list(gen)
    if not test or not gen:
        raise DomainError("test and generated sets must be non-empty")
    h_trans = cfg.transition_altitude
    levels = grid.levels
    t_ttb = [descent_time(tr, grid) for tr in test if spans_grid(tr, grid)]
    g_ttb = [descent_time(tr, grid) for tr in gen if spans_grid(tr, grid)]
    ttb = DistanceTriple.between(g_ttb, t_ttb) if t_ttb and g_ttb else None
    ttb_bada = None
    if t_ttb and bada is not None and spans_grid(bada, grid):
        ttb_bada = mae_of_means([descent_time(bada, grid)], t_ttb)
    rep = MetricsReport(cfg.type_code, h_trans, ttb, ttb_bada, n_test=len(test), n_gen=len(gen),
                        n_test_spanning=len(t_ttb), n_gen_spanning=len(g_ttb))
    for q in QUANTITIES:
        tvm, gvm = level_matrix(test, grid, q), level_matrix(gen, grid, q)
        split = {m: _split_means(_per_level(tvm, gvm, m), levels, h_trans) for m in MEASURES}
        for i, side in enumerate(("above", "below")):
            vals = [split[m][i] for m in MEASURES]
            rep.levels[(q, side)] = None if vals[0] is None else DistanceTriple(*vals)
        if bada is not None:
            b = _split_means(_per_level(tvm, level_matrix([bada], grid, q), "mae"), levels, h_trans)
            rep.bada_level_mae[(q, "above")], rep.bada_level_mae[(q, "below")] = b
    return rep


def write_report_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for rep in reports:
            for row in rep.rows():
                w.writerow({**row, "value": "" if row["value"] is None else repr(float(row["value"]))})


CURVE_FIELDS = ["quantity", "curve", "set", "x", "y"]


def curve_rows(test_ttb, gen_ttb, n_points: int = 200):
    """ECDF steps and KDE densities of time to bottom for both sets."""
    rows = []
    both = np.concatenate([_samples(test_ttb), _samples(gen_ttb)])
    lo, hi = both.min(), both.max()
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    xs = np.linspace(lo - pad, hi + pad, n_points)
    for name, s in (("test", test_ttb), ("gen", gen_ttb)):
        x, y = ecdf(s)
        rows += [{"quantity": "time_to_bottom", "curve": "ecdf", "set": name, "x": a, "y": b}
                 for a, b in zip(x, y)]
        if len(s) >= 2:
            rows += [{"quantity": "time_to_bottom", "curve": "kde", "set": name, "x": a, "y": b}
                     for a, b in zip(xs, kde_pdf(s, xs))]
    return rows


def write_curves_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, CURVE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({**r, "x": repr(float(r["x"])), "y": repr(float(r["y"]))})
