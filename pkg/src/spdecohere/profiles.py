"""Image-charge velocity profiles and their Fourier spectra.

A steep of the grating makes the image charge move vertically with a
piecewise-linear velocity ``u0'(t)`` on ``[0, tau_z]``. Its spectrum
``F(w) = int u0'(t) e^{i w t} dt`` is known in closed form segment by
segment, and for large ``w`` it reduces exactly to a finite sum over the
profile's kinks, which is what makes the frequency tails integrable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import NonConvergentError, ProximityWarning, ValidationError
from .quadrature import (
    DEFAULT_QUAD,
    PowerTrigSeries,
    QuadratureSpec,
    SpectralIntegral,
    integrate_spectral,
)

__all__ = [
    "VelocityProfile",
    "GratingGeometry",
    "BeamConfig",
    "SpectralTransform",
    "triangular_profile",
    "asymmetric_triangular_profile",
    "zero_profile",
    "profile_from_grating",
    "proximity_flags",
    "displacement",
    "transform",
    "spectral_moment",
]


@dataclass(frozen=True)
class VelocityProfile:
    """Continuous piecewise-linear velocity over one steep.

    ``times`` start at 0 and increase strictly to ``tau_z``; velocities are in
    units of c. Endpoint velocities must vanish unless ``open_ends`` is set,
    which is only useful for probing the divergence of the spectral moment.
    ``strict`` additionally enforces ``max |v| < 1``.
    """

    times: Tuple[float, ...]
    velocities: Tuple[float, ...]
    open_ends: bool = False
    strict: bool = False

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        v = tuple(float(x) for x in self.velocities)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "velocities", v)
        if len(t) != len(v) or len(t) < 2:
            raise ValidationError("need at least two (time, velocity) breakpoints of equal count")
        if not all(math.isfinite(x) for x in t + v):
            raise ValidationError("breakpoints must be finite")
        if t[0] != 0.0:
            raise ValidationError(f"first breakpoint must be at t=0, got {t[0]}")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValidationError("breakpoint times must be strictly increasing")
        if not self.open_ends and (v[0] != 0.0 or v[-1] != 0.0):
            raise ValidationError("velocity must vanish at t=0 and t=tau_z")
        if self.strict and max(abs(x) for x in v) >= 1.0:
            raise ValidationError("image-charge velocity must stay below c")

    @property
    def duration(self) -> float:
        return self.times[-1]

    @property
    def peak(self) -> float:
        return max(abs(x) for x in self.velocities)

    @property
    def is_zero(self) -> bool:
        return all(x == 0.0 for x in self.velocities)

    def scaled(self, factor: float) -> "VelocityProfile":
        """Multiply every velocity by ``factor``."""
        return VelocityProfile(self.times, tuple(factor * x for x in self.velocities),
                               self.open_ends, self.strict)

    def time_scaled(self, factor: float) -> "VelocityProfile":
        """Stretch the time axis by ``factor`` keeping the velocities."""
        if not factor > 0:
            raise ValidationError("time scale factor must be positive")
        return VelocityProfile(tuple(factor * x for x in self.times), self.velocities,
                               self.open_ends, self.strict)

    def reversed(self) -> "VelocityProfile":
        """The profile ``t -> tau_z - t``."""
        tau = self.duration
        times = tuple(tau - x for x in reversed(self.times))
        times = (0.0,) + times[1:-1] + (tau,)
        return VelocityProfile(times, tuple(reversed(self.velocities)), self.open_ends, self.strict)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.times, self.velocities)
        return np.where((t < 0) | (t > self.duration), 0.0, out)


def triangular_profile(v_z: float, tau_z: float, strict: bool = False) -> VelocityProfile:
    """Two phases of constant acceleration: peak ``2 v_z`` at ``tau_z / 2``, area ``v_z tau_z``."""
    if not v_z >= 0:
        raise ValidationError(f"v_z must be >= 0, got {v_z}")
    if not tau_z > 0:
        raise ValidationError(f"tau_z must be > 0, got {tau_z}")
    if strict and 2.0 * v_z >= 1.0:
        raise ValidationError(f"triangular peak 2*v_z = {2 * v_z} is not sub-luminal")
    return VelocityProfile((0.0, 0.5 * tau_z, tau_z), (0.0, 2.0 * v_z, 0.0), strict=strict)


def asymmetric_triangular_profile(v_z: float, tau_z: float, peak_at: float) -> VelocityProfile:
    """Triangular pulse with its apex at ``peak_at * tau_z``; area stays ``v_z tau_z``."""
    if not 0.0 < peak_at < 1.0:
        raise ValidationError("peak_at must lie strictly between 0 and 1")
    if not v_z >= 0 or not tau_z > 0:
        raise ValidationError("need v_z >= 0 and tau_z > 0")
    return VelocityProfile((0.0, peak_at * tau_z, tau_z), (0.0, 2.0 * v_z, 0.0))


def zero_profile(tau_z: float = 1.0) -> VelocityProfile:
    return VelocityProfile((0.0, tau_z), (0.0, 0.0))


@dataclass(frozen=True)
class GratingGeometry:
    """``n_grooves`` grooves of period ``2 d``, depth ``xi`` and mean slope angle ``theta``.

    ``theta = 0`` is accepted and means a flat conductor.
    """

    n_grooves: int
    d: float
    xi: float
    theta: float

    def __post_init__(self):
        if isinstance(self.n_grooves, bool) or int(self.n_grooves) != self.n_grooves or self.n_grooves < 1:
            raise ValidationError(f"groove count must be a positive integer, got {self.n_grooves}")
        object.__setattr__(self, "n_grooves", int(self.n_grooves))
        if not self.d > 0:
            raise ValidationError(f"half-period d must be > 0, got {self.d}")
        if not self.xi > 0:
            raise ValidationError(f"groove depth xi must be > 0, got {self.xi}")
        if not 0.0 <= self.theta < 0.5 * math.pi:
            raise ValidationError(f"slope angle must lie in [0, pi/2), got {self.theta}")

    @property
    def flags(self) -> dict:
        return {"depth_not_small": self.xi >= self.d}


@dataclass(frozen=True)
class BeamConfig:
    """Beam speed, path separation ``R``, height ``z0``, grating correlation and coupling ``e^2``."""

    v_y: float
    R: float
    z0: float
    epsilon: int
    e2: float

    def __post_init__(self):
        if not 0.0 < self.v_y < 1.0:
            raise ValidationError(f"v_y must lie in (0, 1), got {self.v_y}")
        if not self.R >= 0:
            raise ValidationError(f"R must be >= 0, got {self.R}")
        if not self.z0 > 0:
            raise ValidationError(f"z0 must be > 0, got {self.z0}")
        if self.epsilon not in (-1, 0, 1):
            raise ValidationError(f"epsilon must be -1, 0 or +1, got {self.epsilon}")
        object.__setattr__(self, "epsilon", int(self.epsilon))
        if not self.e2 > 0:
            raise ValidationError(f"e2 must be > 0, got {self.e2}")


def proximity_flags(g: GratingGeometry, beam: BeamConfig, threshold: float = 0.2) -> dict:
    """Diagnostics for the image-charge regime; none of them is fatal."""
    flags = {
        "z0_over_d": beam.z0 / g.d > threshold,
        "xi_over_d": g.xi / g.d > threshold,
        "v_y_not_small": beam.v_y > threshold,
    }
    # small z0 / R is needed for epsilon = -1 or 0 (R ignored when it is 0)
    flags["z0_over_R"] = beam.epsilon in (-1, 0) and (beam.R == 0 or beam.z0 / beam.R > threshold)
    return flags


def profile_from_grating(
    g: GratingGeometry, beam: BeamConfig, proximity_threshold: float = 0.2
) -> Tuple[VelocityProfile, float]:
    """Triangular steep profile and inter-steep time ``T_z = d / v_y``.

    ``v_z = v_y tan(theta)`` and ``tau_z = xi / v_z``. A flat conductor
    (``theta = 0``) yields the zero profile on ``[0, T_z / 2]``.
    """
    t_z = g.d / beam.v_y
    if g.xi / g.d > proximity_threshold or beam.z0 / g.d > proximity_threshold:
        warnings.warn(
            f"proximity regime weakly satisfied: z0/d={beam.z0 / g.d:.3g}, xi/d={g.xi / g.d:.3g}",
            ProximityWarning,
            stacklevel=2,
        )
    if g.theta == 0.0:
        return zero_profile(0.5 * t_z), t_z
    v_z = beam.v_y * math.tan(g.theta)
    if v_z >= 0.5:
        raise ValidationError(f"v_z = {v_z:.6g} >= 0.5: triangular image velocity would exceed c")
    tau_z = g.xi / v_z
    if tau_z >= t_z:
        raise ValidationError(
            f"steep duration tau_z = {tau_z:.6g} is not shorter than T_z = {t_z:.6g} (slope too shallow)"
        )
    return triangular_profile(v_z, tau_z), t_z


def displacement(p: VelocityProfile) -> float:
    """Time integral of the velocity (the steep height), exact trapezoid sum."""
    t = np.asarray(p.times)
    v = np.asarray(p.velocities)
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


# --------------------------------------------------------------------------
# Closed-form spectrum
# --------------------------------------------------------------------------

_SERIES_SWITCH = 1.0
_NSERIES = 22


def _phi1_psi(z):
    """``phi1 = (e^z - 1)/z`` and ``psi = int_0^1 x e^{zx} dx`` for complex ``z``."""
    phi1 = np.empty(z.shape, dtype=complex)
    psi = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < _SERIES_SWITCH
    if np.any(small):
        zs = z[small]
        term = np.ones(zs.shape, dtype=complex)  # z^n / n!
        a1 = np.zeros(zs.shape, dtype=complex)
        a2 = np.zeros(zs.shape, dtype=complex)
        for n in range(_NSERIES):
            a1 += term / (n + 1)
            a2 += term / (n + 2)
            term = term * zs / (n + 1)
        phi1[small] = a1
        psi[small] = a2
    big = ~small
    if np.any(big):
        zb = z[big]
        ez = np.exp(zb)
        phi1[big] = (ez - 1.0) / zb
        psi[big] = (ez * (zb - 1.0) + 1.0) / (zb * zb)
    return phi1, psi


@dataclass(frozen=True)
class SpectralTransform:
    """Closed-form ``F(w)`` of a piecewise-linear profile.

    ``segments`` holds ``(t_start, t_end, slope, intercept)`` rows so that
    ``u0'(t) = slope * t + intercept`` on each piece.
    """

    segments: Tuple[Tuple[float, float, float, float], ...]
    duration: float
    endpoint_velocities: Tuple[float, float]
    _seg: np.ndarray = field(init=False, repr=False, compare=False)
    _kink_cosines: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        object.__setattr__(self, "_seg", seg)
        t, _, dslope = self.kinks()
        # |sum_k D_k e^{i w t_k}|^2 = sum_{j,k} D_j D_k cos(w (t_j - t_k)), merged by |t_j - t_k|
        lag = np.abs(np.subtract.outer(t, t)).ravel()
        amp = np.multiply.outer(dslope, dslope).ravel()
        key = np.round(lag / max(self.duration, 1e-300), 12)
        uniq, inv = np.unique(key, return_inverse=True)
        coef = np.bincount(inv.ravel(), weights=amp, minlength=uniq.size)
        lags = np.bincount(inv.ravel(), weights=lag, minlength=uniq.size) / np.bincount(inv.ravel())
        object.__setattr__(self, "_kink_cosines",
                           tuple((float(c), float(b)) for c, b in zip(coef, lags) if c != 0.0))

    @property
    def displacement(self) -> float:
        seg = self._seg
        t0, t1, s, c = seg.T
        return float(np.sum(0.5 * s * (t1**2 - t0**2) + c * (t1 - t0)))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self._seg[:, 2:] == 0.0))

    @property
    def has_jumps(self) -> bool:
        return any(v != 0.0 for v in self.endpoint_velocities)

    def __call__(self, omega):
        """Complex ``F(w)`` (vectorized, any real ``w``)."""
        w = np.asarray(omega, dtype=float)
        flat = w.reshape(-1)
        out = np.zeros(flat.shape, dtype=complex)
        for t0, t1, s, c in self._seg:
            if s == 0.0 and c == 0.0:
                continue
            h = t1 - t0
            phi1, psi = _phi1_psi(1j * flat * h)
            out += np.exp(1j * flat * t0) * ((s * t0 + c) * h * phi1 + s * h * h * psi)
        return out.reshape(w.shape)

    def power(self, omega):
        """``|F(w)|^2``; the kink expansion is used once ``|w| tau_z > 2``."""
        w = np.asarray(omega, dtype=float)
        if self.has_jumps:
            f = self(w)
            return f.real**2 + f.imag**2
        out = np.empty(w.shape)
        high = np.abs(w) * self.duration > 2.0
        if np.any(high):
            wh = w[high]
            acc = np.zeros(wh.shape)
            for c, b in self._kink_cosines:
                acc += c if b == 0.0 else c * np.cos(b * wh)
            out[high] = acc / wh**4
        low = ~high
        if np.any(low):
            f = self(w[low])
            out[low] = f.real**2 + f.imag**2
        return out

    def kinks(self):
        """Value jumps ``J_k`` and slope jumps ``D_k`` at the breakpoints ``t_k``.

        ``F(w) = sum_k (i J_k / w - D_k / w^2) e^{i w t_k}`` exactly for ``w != 0``.
        """
        seg = self._seg
        t = np.append(seg[:, 0], seg[-1, 1])
        slope = np.concatenate([[0.0], seg[:, 2], [0.0]])
        left_val = np.concatenate([[0.0], seg[:, 2] * seg[:, 1] + seg[:, 3]])
        right_val = np.concatenate([seg[:, 2] * seg[:, 0] + seg[:, 3], [0.0]])
        jumps = right_val - left_val
        dslope = np.diff(slope)
        return t, jumps, dslope

    def asymptotic(self) -> PowerTrigSeries:
        """``F`` as a ``PowerTrigSeries`` (exact for ``w > 0``)."""
        t, jumps, dslope = self.kinks()
        coef = np.concatenate([1j * jumps, -dslope])
        power = np.concatenate([np.ones(t.size, dtype=int), np.full(t.size, 2)])
        freq = np.concatenate([t, t])
        return PowerTrigSeries(coef, power, freq).compress()

    def power_series(self) -> PowerTrigSeries:
        """``|F(w)|^2`` as a ``PowerTrigSeries``."""
        f = self.asymptotic()
        return f * f.conj()

    def omega_break(self, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
        return quad.break_factor / self.duration


def transform(p: VelocityProfile) -> SpectralTransform:
    t = np.asarray(p.times)
    v = np.asarray(p.velocities)
    slope = np.diff(v) / np.diff(t)
    intercept = v[:-1] - slope * t[:-1]
    segs = tuple(
        (float(a), float(b), float(s), float(c))
        for a, b, s, c in zip(t[:-1], t[1:], slope, intercept)
    )
    return SpectralTransform(segs, p.duration, (p.velocities[0], p.velocities[-1]))


def _moment_integral(s: SpectralTransform, order: int, quad: QuadratureSpec) -> SpectralIntegral:
    if s.has_jumps:
        raise NonConvergentError(
            "velocity does not vanish at the steep endpoints; |F|^2 ~ w^-2 and the moment diverges"
        )
    if s.is_zero:
        return SpectralIntegral(0.0, 0.0, True, 0, s.omega_break(quad), 0.0, "none")
    tail = s.power_series().shift_power(-order) if quad.omega_max is None else None

    def f(w):
        return w**order * s.power(w)

    return integrate_spectral(
        f, quad, omega_break=s.omega_break(quad), tail=tail, panel_width=np.pi / s.duration
    )


def spectral_moment(s: SpectralTransform, quad: QuadratureSpec = DEFAULT_QUAD,
                    full_output: bool = False):
    """``int_0^inf w |F(w)|^2 dw``; raises ``NonConvergentError`` for velocity jumps."""
    res = _moment_integral(s, 1, quad)
    return (res.value, res) if full_output else res.value


def mean_frequency(s: SpectralTransform, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Moment-weighted mean frequency ``int w^2 |F|^2 / int w |F|^2`` (0 for a zero profile)."""
    m1 = _moment_integral(s, 1, quad).value
    if m1 == 0.0:
        return 0.0
    return _moment_integral(s, 2, quad).value / m1
