"""Total-energy descent kernel.

Energy share factors (ESF) used with ``esf_mode="bada_regimes"``, with
``mu = (kappa - 1) / kappa`` and ``x = 1 + (kappa - 1)/2 * M**2``:

* constant Mach above the tropopause: ``f = 1``
* constant Mach below the tropopause:
  ``f = 1 / (1 + kappa*R*lapse/(2*g0) * M**2)``
* constant CAS below the tropopause:
  ``f = 1 / (1 + kappa*R*lapse/(2*g0) * M**2 + x**(-1/(kappa-1)) * (x**(kappa/(kappa-1)) - 1))``
* constant CAS above the tropopause: as above without the lapse term.

``esf_mode="exact_profile"`` instead uses ``f = 1 / (1 + V_TAS/g0 * dV_TAS/dh)``
evaluated along the speed profile being flown.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np

from . import atmosphere as atm
from .atmosphere import ISA, IsaConstants
from .errors import DomainError, NonDescendingProfileError, SingularityError

FL = 30.48  # metres per flight level
RATE_EPS = 1e-6  # m/s; descent slower than this cannot be integrated
ESF_MODES = ("bada_regimes", "exact_profile")


def fl_to_m(fl):
    return np.asarray(fl, dtype=float) * FL if np.ndim(fl) else float(fl) * FL


def m_to_fl(h):
    return np.asarray(h, dtype=float) / FL if np.ndim(h) else float(h) / FL


class EsfRegime(enum.IntEnum):
    ConstCasBelowTrop = 0
    ConstCasAboveTrop = 1
    ConstMachBelowTrop = 2
    ConstMachAboveTrop = 3


@dataclass(frozen=True)
class AircraftConfig:
    type_code: str
    mass: float
    idle_thrust_coeffs: tuple[float, float, float]
    cas_ref: float
    mach_ref: float
    max_fl: float
    nominal_cas_schedule: tuple[tuple[float, float], ...]
    nominal_drag_coeffs: tuple[float, ...] = (0.0,)
    esf_mode: str = "bada_regimes"
    isa: IsaConstants = field(default_factory=IsaConstants)

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError("mass must be positive")
        if not self.max_fl > 150:
            raise DomainError("max_fl must exceed FL150")
        if not 0.0 < self.mach_ref < 1.0:
            raise DomainError("mach_ref must lie in (0, 1)")
        if len(self.idle_thrust_coeffs) != 3:
            raise DomainError("idle_thrust_coeffs needs exactly three values")
        if self.esf_mode not in ESF_MODES:
            raise DomainError(f"esf_mode must be one of {ESF_MODES}")
        if len(self.nominal_cas_schedule) < 1:
            raise DomainError("nominal_cas_schedule is empty")

    @classmethod
    def from_dict(cls, d: dict) -> "AircraftConfig":
        d = dict(d)
        sched = tuple(sorted((float(h), float(v)) for h, v in d.pop("nominal_cas_schedule")))
        return cls(
            type_code=str(d.pop("type_code")),
            mass=float(d.pop("mass")),
            idle_thrust_coeffs=tuple(float(x) for x in d.pop("idle_thrust_coeffs")),
            cas_ref=float(d.pop("cas_ref")),
            mach_ref=float(d.pop("mach_ref")),
            max_fl=float(d.pop("max_fl")),
            nominal_cas_schedule=sched,
            nominal_drag_coeffs=tuple(float(x) for x in d.pop("nominal_drag_coeffs", (0.0,))),
            esf_mode=str(d.pop("esf_mode", "bada_regimes")),
            isa=IsaConstants.from_dict(d.pop("isa", None)),
        )

    def to_dict(self) -> dict:
        return {
            "type_code": self.type_code,
            "mass": self.mass,
            "idle_thrust_coeffs": list(self.idle_thrust_coeffs),
            "cas_ref": self.cas_ref,
            "mach_ref": self.mach_ref,
            "max_fl": self.max_fl,
            "nominal_cas_schedule": [list(p) for p in self.nominal_cas_schedule],
            "nominal_drag_coeffs": list(self.nominal_drag_coeffs),
            "esf_mode": self.esf_mode,
            "isa": self.isa.to_dict(),
        }

    @property
    def transition_altitude(self) -> float:
        return _cached_transition(self.cas_ref, self.mach_ref, self.isa)


@functools.lru_cache(maxsize=256)
def _cached_transition(cas_ref, mach_ref, c):
    return atm.transition_altitude(cas_ref, mach_ref, c)


def energy_share_factor(M, regime, c: IsaConstants = ISA):
    M = np.asarray(M, dtype=float)
    if np.any(~(M > 0.0)) or np.any(~(M < 1.0)):
        raise DomainError("Mach number must lie in (0, 1) for the ESF")
    regime = np.broadcast_to(np.asarray(regime, dtype=int), M.shape)
    lapse_term = c.kappa * c.R * c.lapse_rate / (2.0 * c.g0) * M**2
    x = 1.0 + 0.5 * (c.kappa - 1.0) * M**2
    cas_term = x ** (-1.0 / (c.kappa - 1.0)) * (x ** (c.kappa / (c.kappa - 1.0)) - 1.0)
    f = np.select(
        [regime == EsfRegime.ConstCasBelowTrop,
         regime == EsfRegime.ConstCasAboveTrop,
         regime == EsfRegime.ConstMachBelowTrop],
        [1.0 / (1.0 + lapse_term + cas_term),
         1.0 / (1.0 + cas_term),
         1.0 / (1.0 + lapse_term)],
        default=1.0,
    )
    return float(f) if f.ndim == 0 else f


def select_regime(h, h_trans: float, c: IsaConstants = ISA):
    h = np.asarray(h, dtype=float)
    mach_hold = h >= h_trans
    above_trop = h >= c.h_trop
    r = np.where(mach_hold,
                 np.where(above_trop, EsfRegime.ConstMachAboveTrop, EsfRegime.ConstMachBelowTrop),
                 np.where(above_trop, EsfRegime.ConstCasAboveTrop, EsfRegime.ConstCasBelowTrop))
    return EsfRegime(int(r)) if r.ndim == 0 else r


def exact_esf(v_tas, dvtas_dh, c: IsaConstants = ISA):
    denom = 1.0 + np.asarray(v_tas) / c.g0 * np.asarray(dvtas_dh)
    if np.any(denom <= 0.0):
        raise SingularityError("speed profile decelerates too fast for a positive share factor")
    return 1.0 / denom


def idle_thrust(h, cfg: AircraftConfig):
    """Idle descent thrust ``c1 * (1 - h/c2 + c3*h**2)``, floored at zero."""
    c1, c2, c3 = cfg.idle_thrust_coeffs
    h = np.asarray(h, dtype=float)
    t = np.maximum(c1 * (1.0 - h / c2 + c3 * h * h), 0.0)
    return float(t) if t.ndim == 0 else t


def rocd_from_state(thrust, drag, v_tas, mass, esf, g0=ISA.g0):
    """Rate of descent from the total-energy balance with zero ISA offset."""
    return (np.asarray(thrust) - drag) * v_tas / (mass * g0) * esf


def _share_factor(h, v_tas, cfg, c, dvtas_dh):
    M = v_tas / atm.speed_of_sound(h, c)
    if cfg.esf_mode == "exact_profile":
        if dvtas_dh is None:
            raise DomainError("exact_profile ESF needs dV_TAS/dh")
        return M, exact_esf(v_tas, dvtas_dh, c)
    regime = select_regime(h, cfg.transition_altitude, c)
    return M, energy_share_factor(M, regime, c)


def rocd(h, drag, v_cas, cfg: AircraftConfig, c: IsaConstants | None = None, dvtas_dh=None):
    """dh/dt (m/s) for given drag and CAS at altitude ``h``."""
    c = c or cfg.isa
    h, drag, v_cas = (np.asarray(x, dtype=float) for x in (h, drag, v_cas))
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(drag)) and np.all(np.isfinite(v_cas))):
        raise DomainError("non-finite input to rocd")
    if np.any(drag <= 0) or np.any(v_cas <= 0):
        raise DomainError("drag and CAS must be positive")
    v_tas = atm.cas_to_tas(v_cas, h, c)
    _, f = _share_factor(h, v_tas, cfg, c, dvtas_dh)
    out = rocd_from_state(idle_thrust(h, cfg), drag, v_tas, cfg.mass, f, c.g0)
    return float(out) if np.ndim(out) == 0 else out


def infer_drag(h, rocd_obs, v_ias, mach, cfg: AircraftConfig, c: IsaConstants | None = None,
               dvtas_dh=None):
    """Drag implied by an observed descent rate (inverse of :func:`rocd`).

    IAS is taken as CAS. The ESF uses the reported Mach number.
    """
    c = c or cfg.isa
    arrs = [np.asarray(x, dtype=float) for x in (h, rocd_obs, v_ias, mach)]
    if not all(np.all(np.isfinite(a)) for a in arrs):
        raise DomainError("non-finite blip quantity")
    h, rocd_obs, v_ias, mach = arrs
    v_tas = atm.cas_to_tas(v_ias, h, c)
    if cfg.esf_mode == "exact_profile":
        if dvtas_dh is None:
            raise DomainError("exact_profile ESF needs dV_TAS/dh")
        f = exact_esf(v_tas, dvtas_dh, c)
    else:
        f = energy_share_factor(mach, select_regime(h, cfg.transition_altitude, c), c)
    denom = f * v_tas
    if np.any(denom == 0):
        raise SingularityError("f(M) * V_TAS vanishes")
    d = idle_thrust(h, cfg) - rocd_obs * cfg.mass * c.g0 / denom
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class DescentProfile:
    levels: np.ndarray
    drag_values: np.ndarray
    cas_values: np.ndarray

    def __post_init__(self):
        n = len(self.levels)
        if len(self.drag_values) != n or len(self.cas_values) != n:
            raise DomainError("profile arrays must match the grid length")
        if not (np.all(np.isfinite(self.drag_values)) and np.all(np.isfinite(self.cas_values))):
            raise DomainError("profile contains non-finite values")
        if np.any(self.cas_values <= 0) or np.any(self.drag_values <= 0):
            raise DomainError("profile drag and CAS must be positive")


@dataclass(frozen=True)
class SimulatedTrajectory:
    t: np.ndarray
    h: np.ndarray
    v_cas: np.ndarray
    v_tas: np.ndarray
    rocd: np.ndarray
    drag: np.ndarray

    @property
    def time_to_bottom(self) -> float:
        return float(self.t[-1] - self.t[0])

    def __len__(self):
        return len(self.t)


def profile_rocd(profile: DescentProfile, cfg: AircraftConfig, c: IsaConstants | None = None):
    """ROCD at every level of a profile (handles the exact-profile ESF derivative)."""
    c = c or cfg.isa
    h = np.asarray(profile.levels, dtype=float)
    dv = None
    if cfg.esf_mode == "exact_profile":
        v_tas = atm.cas_to_tas(profile.cas_values, h, c)
        dv = np.gradient(v_tas, h) if len(h) > 1 else np.zeros(1)
    return np.atleast_1d(rocd(h, profile.drag_values, profile.cas_values, cfg, c, dv))


def integrate_descent(profile: DescentProfile, h_start: float, cfg: AircraftConfig,
                      c: IsaConstants | None = None, h_end: float | None = None,
                      substeps: int = 1) -> SimulatedTrajectory:
    """Time-march a descent from ``h_start`` down to ``h_end`` (default: grid bottom).

    Time is the trapezoidal integral of ``dh / |dh/dt|`` over altitude; samples are
    emitted at ``h_start`` and every grid level below it. ``substeps`` splits each
    altitude step into equal parts with linearly interpolated drag and CAS.
    """
    c = c or cfg.isa
    levels = np.asarray(profile.levels, dtype=float)
    lo, hi = levels[0], levels[-1]
    h_end = lo if h_end is None else float(h_end)
    tol = 1e-6
    if not (lo - tol <= h_start <= hi + tol) or not (lo - tol <= h_end <= h_start + tol):
        raise DomainError("integration limits outside the profile grid")

    # descending sample altitudes: h_start, interior grid levels, h_end
    inner = levels[(levels < h_start - tol) & (levels > h_end + tol)][::-1]
    h_out = np.concatenate([[h_start], inner, [h_end]]) if h_start - h_end > tol else np.array([h_start])

    def at(hq):
        return (np.interp(hq, levels, profile.drag_values),
                np.interp(hq, levels, profile.cas_values))

    if substeps > 1 and len(h_out) > 1:
        frac = np.arange(substeps) / substeps
        h_fine = np.concatenate([a + (b - a) * frac for a, b in zip(h_out[:-1], h_out[1:])] + [h_out[-1:]])
    else:
        h_fine = h_out
    d_fine, v_fine = at(h_fine)
    dv = None
    if cfg.esf_mode == "exact_profile":
        full_tas = atm.cas_to_tas(profile.cas_values, levels, c)
        grad = np.gradient(full_tas, levels) if len(levels) > 1 else np.zeros(1)
        dv = np.interp(h_fine, levels, grad)
    r_fine = np.atleast_1d(rocd(h_fine, d_fine, v_fine, cfg, c, dv))
    if np.any(r_fine >= -RATE_EPS):
        k = int(np.argmax(r_fine >= -RATE_EPS))
        raise NonDescendingProfileError(
            f"ROCD {r_fine[k]:.3g} m/s at h={h_fine[k]:.1f} m; profile cannot be integrated")

    dt = 0.5 * (h_fine[:-1] - h_fine[1:]) * (1.0 / -r_fine[:-1] + 1.0 / -r_fine[1:])
    t_fine = np.concatenate([[0.0], np.cumsum(dt)])
    pick = np.arange(0, len(h_fine), substeps) if substeps > 1 else np.arange(len(h_fine))
    v_tas = np.atleast_1d(atm.cas_to_tas(v_fine[pick], h_fine[pick], c))
    return SimulatedTrajectory(
        t=t_fine[pick], h=h_fine[pick], v_cas=v_fine[pick], v_tas=v_tas,
        rocd=r_fine[pick], drag=d_fine[pick],
    )


def nominal_profile(cfg: AircraftConfig, levels) -> DescentProfile:
    """Deterministic baseline: scheduled CAS and the polynomial drag law (h in km)."""
    levels = np.asarray(levels, dtype=float)
    sched = np.asarray(cfg.nominal_cas_schedule, dtype=float)
    cas = np.interp(levels, sched[:, 0], sched[:, 1])
    drag = np.polynomial.polynomial.polyval(levels / 1000.0, cfg.nominal_drag_coeffs)
    return DescentProfile(levels=levels, drag_values=drag, cas_values=cas)


def nominal_trajectory(cfg: AircraftConfig, levels, c: IsaConstants | None = None) -> SimulatedTrajectory:
    levels = np.asarray(levels, dtype=float)
    return integrate_descent(nominal_profile(cfg, levels), levels[-1], cfg, c)
