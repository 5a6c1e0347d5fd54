"""International Standard Atmosphere and airspeed conversions.

Everything is SI: altitudes are geodetic metres, speeds m/s. The temperature
offset from ISA is always zero. Functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoTransitionError

H_MAX = 20000.0


@dataclass(frozen=True)
class IsaConstants:
    T0: float = 288.15
    p0: float = 101325.0
    rho0: float = 1.225
    g0: float = 9.80665
    kappa: float = 1.4
    R: float = 287.05287
    lapse_rate: float = -0.0065
    h_trop: float = 11000.0

    def __post_init__(self):
        for name in ("T0", "p0", "rho0", "g0", "kappa", "R", "h_trop"):
            if not getattr(self, name) > 0:
                raise DomainError(f"ISA constant {name} must be positive")
        if not self.lapse_rate < 0:
            raise DomainError("ISA lapse_rate must be negative")

    @property
    def mu(self) -> float:
        return (self.kappa - 1.0) / self.kappa

    @property
    def T_trop(self) -> float:
        return self.T0 + self.lapse_rate * self.h_trop

    @classmethod
    def from_dict(cls, d: dict | None) -> "IsaConstants":
        return cls(**{k: float(v) for k, v in (d or {}).items()})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


ISA = IsaConstants()


@dataclass(frozen=True)
class AtmosphereState:
    temperature: np.ndarray | float
    pressure: np.ndarray | float
    density: np.ndarray | float
    speed_of_sound: np.ndarray | float


def _check_altitude(h):
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)) or np.any(h < 0.0) or np.any(h > H_MAX):
        raise DomainError(f"altitude outside [0, {H_MAX:.0f}] m")
    return h


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def isa_state(h, c: IsaConstants = ISA) -> AtmosphereState:
    """ISA temperature, pressure, density and speed of sound at geodetic altitude ``h``.

    Density is tied to ``rho0`` through the power law rather than to ``p/(R T)``,
    so that ``p/rho`` equals ``p0/rho0`` exactly at sea level and CAS equals TAS
    there.
    """
    h = _check_altitude(h)
    expo = -c.g0 / (c.lapse_rate * c.R)  # pressure exponent of the tropospheric law
    T_trop = c.T_trop
    below = h < c.h_trop

    theta = np.where(below, (c.T0 + c.lapse_rate * h) / c.T0, T_trop / c.T0)
    p_trop = c.p0 * (T_trop / c.T0) ** expo
    rho_trop = c.rho0 * (T_trop / c.T0) ** (expo - 1.0)
    decay = np.exp(-c.g0 / (c.R * T_trop) * np.maximum(h - c.h_trop, 0.0))

    T = c.T0 * theta
    p = np.where(below, c.p0 * theta**expo, p_trop * decay)
    rho = np.where(below, c.rho0 * theta ** (expo - 1.0), rho_trop * decay)
    a = np.sqrt(c.kappa * c.R * T)
    return AtmosphereState(_unwrap(T), _unwrap(p), _unwrap(rho), _unwrap(a))


def speed_of_sound(h, c: IsaConstants = ISA):
    return isa_state(h, c).speed_of_sound


def cas_to_tas(v_cas, h, c: IsaConstants = ISA):
    """Calibrated to true airspeed through impact pressure (compressible flow)."""
    v_cas = np.asarray(v_cas, dtype=float)
    if np.any(v_cas < 0) or not np.all(np.isfinite(v_cas)):
        raise DomainError("CAS must be finite and non-negative")
    s = isa_state(h, c)
    mu = c.mu
    qc = c.p0 * ((1.0 + 0.5 * mu * c.rho0 / c.p0 * v_cas**2) ** (1.0 / mu) - 1.0)
    inner = (1.0 + qc / s.pressure) ** mu - 1.0
    return _unwrap(np.sqrt(2.0 / mu * s.pressure / s.density * inner))


def tas_to_cas(v_tas, h, c: IsaConstants = ISA):
    v_tas = np.asarray(v_tas, dtype=float)
    if np.any(v_tas < 0) or not np.all(np.isfinite(v_tas)):
        raise DomainError("TAS must be finite and non-negative")
    s = isa_state(h, c)
    mu = c.mu
    qc = s.pressure * ((1.0 + 0.5 * mu * s.density / s.pressure * v_tas**2) ** (1.0 / mu) - 1.0)
    inner = (1.0 + qc / c.p0) ** mu - 1.0
    return _unwrap(np.sqrt(2.0 / mu * c.p0 / c.rho0 * inner))


def mach_number(v_tas, h, c: IsaConstants = ISA):
    v_tas = np.asarray(v_tas, dtype=float)
    if np.any(v_tas < 0):
        raise DomainError("TAS must be non-negative")
    return _unwrap(v_tas / speed_of_sound(h, c))


def transition_altitude(cas_ref: float, mach_ref: float, c: IsaConstants = ISA,
                        tol: float = 1e-6) -> float:
    """Crossover altitude where ``cas_ref`` and ``mach_ref`` give the same TAS.

    Bisection over [0, 20000] m down to ``tol`` metres.
    """
    if not cas_ref > 0:
        raise DomainError("cas_ref must be positive")
    if not 0.0 < mach_ref < 1.0:
        raise DomainError("mach_ref must lie in (0, 1)")

    def gap(h):
        return cas_to_tas(cas_ref, h, c) - mach_ref * speed_of_sound(h, c)

    lo, hi = 0.0, H_MAX
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0.0:
        return lo
    if np.sign(g_lo) == np.sign(g_hi):
        raise NoTransitionError(
            f"CAS {cas_ref:.2f} m/s and Mach {mach_ref:.3f} do not cross in [0, {H_MAX:.0f}] m")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
