"""Decoherence factors of an interference experiment above a conducting grating.

All quantities are in natural units (hbar = c = 1); only the ratios
``R / tau_z`` and ``T_z / tau_z`` and the velocity amplitude enter. ``e2`` is
passed explicitly because its numerical value depends on the electromagnetic
unit convention (see ``E2_PRESETS``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError, ValidityWarning
from .profiles import (
    BeamConfig,
    GratingGeometry,
    SpectralTransform,
    VelocityProfile,
    displacement,
    mean_frequency,
    profile_from_grating,
    proximity_flags,
    transform,
)
from .quadrature import (
    DEFAULT_QUAD,
    PowerTrigSeries,
    QuadratureSpec,
    SpectralIntegral,
    angular_kernel,
    angular_kernel_series,
    groove_sum,
    groove_sum_series,
    integrate_spectral,
)

__all__ = [
    "FINE_STRUCTURE",
    "E2_PRESETS",
    "DecoherenceBreakdown",
    "angular_factor",
    "w_half_zz",
    "w_bb_zz_full",
    "eta_closed",
    "eta_timedomain",
    "two_r_bound_violated",
    "w_sp",
    "visibility",
]

FINE_STRUCTURE = 1.0 / 137.036

# gaussian: e^2 = alpha; heaviside (Heaviside-Lorentz): e^2 = 4 pi alpha
E2_PRESETS = {
    "gaussian": FINE_STRUCTURE,
    "heaviside": 4.0 * math.pi * FINE_STRUCTURE,
}

# below this value of 2 R omega_break the angular kernel is frozen at A(0) in the tail
_SMALL_R_TAIL = 1e-3


def _as_transform(s) -> SpectralTransform:
    if isinstance(s, VelocityProfile):
        return transform(s)
    return s


def _check_epsilon(epsilon):
    if epsilon not in (-1, 0, 1):
        raise ValidationError(f"epsilon must be -1, 0 or +1, got {epsilon}")


def angular_factor(omega, R: float, epsilon: int):
    """``G(w R) = int dOmega (1 - n_z^2) |(e^{i k_x R} - eps e^{-i k_x R}) / 2|^2``."""
    _check_epsilon(epsilon)
    w = np.asarray(omega, dtype=float)
    base = (1 + epsilon * epsilon) / 4.0 * (8.0 * math.pi / 3.0)
    if epsilon == 0:
        return np.full(w.shape, base) if w.ndim else base
    return base - 0.5 * epsilon * angular_kernel(2.0 * R * w)


def _angular_tail_series(R: float, epsilon: int, omega_break: float) -> PowerTrigSeries:
    base = (1 + epsilon * epsilon) / 4.0 * (8.0 * math.pi / 3.0)
    if epsilon == 0:
        return PowerTrigSeries.constant(base)
    if 2.0 * R * omega_break < _SMALL_R_TAIL:
        return PowerTrigSeries.constant(base - 0.5 * epsilon * 8.0 * math.pi / 3.0)
    return PowerTrigSeries.constant(base) + angular_kernel_series(R) * (-0.5 * epsilon)


def _prefactor(e2: float) -> float:
    if not e2 > 0:
        raise ValidationError(f"e2 must be > 0, got {e2}")
    return e2 / (2.0 * math.pi) ** 3


def _zero_result(omega_break: float) -> SpectralIntegral:
    return SpectralIntegral(0.0, 0.0, True, 0, omega_break, 0.0, "none")


def w_half_zz(s, R: float, epsilon: int, e2: float, quad: QuadratureSpec = DEFAULT_QUAD,
              full_output: bool = False):
    """Decoherence of a single steep (half oscillation of the image charge).

    ``e2 / (2 pi)^3 int_0^inf dw w |F(w)|^2 G(w R)``; with ``full_output``
    also returns the ``SpectralIntegral`` (already scaled) for error reporting.
    """
    s = _as_transform(s)
    _check_epsilon(epsilon)
    if not R >= 0:
        raise ValidationError(f"R must be >= 0, got {R}")
    pref = _prefactor(e2)
    wb = s.omega_break(quad)
    if s.is_zero or (epsilon == 1 and R == 0):
        res = _zero_result(wb)
        return (0.0, res) if full_output else 0.0
    if s.has_jumps:
        from .profiles import spectral_moment
        spectral_moment(s, quad)  # raises NonConvergentError

    tail = None
    if quad.omega_max is None:
        tail = s.power_series().shift_power(-1) * _angular_tail_series(R, epsilon, wb)

    def f(w):
        return w * s.power(w) * angular_factor(w, R, epsilon)

    width = math.pi / max(s.duration, 2.0 * R)
    res = integrate_spectral(f, quad, omega_break=wb, tail=tail, panel_width=width).scaled(pref)
    value = max(res.value, 0.0)
    return (value, res) if full_output else value


def two_r_bound_violated(R: float, T_z: float, v_y: float, epsilon: int) -> bool:
    """True when ``eps != 0`` and ``2 R >= T_z (1 - v_y)``."""
    return epsilon != 0 and 2.0 * R >= T_z * (1.0 - v_y)


def w_bb_zz_full(s, R: float, epsilon: int, n_grooves: int, T_z: float, e2: float,
                 quad: QuadratureSpec = DEFAULT_QUAD, v_y: Optional[float] = None,
                 full_output: bool = False):
    """Full ``zz`` term over ``2 N`` steeps with the groove sum ``S(w T_z, N)``.

    The ``k_y v_y`` shift of the groove phase is neglected. When ``v_y`` is
    given, a ``ValidityWarning`` is issued if ``2 R >= T_z (1 - v_y)`` for
    ``eps != 0``.
    """
    s = _as_transform(s)
    _check_epsilon(epsilon)
    if int(n_grooves) != n_grooves or n_grooves < 1:
        raise ValidationError(f"groove count must be a positive integer, got {n_grooves}")
    n = int(n_grooves)
    if not T_z > s.duration:
        raise ValidationError(f"T_z = {T_z} must exceed the steep duration {s.duration}")
    if v_y is not None and two_r_bound_violated(R, T_z, v_y, epsilon):
        warnings.warn(f"2R = {2 * R:.6g} >= T_z (1 - v_y) = {T_z * (1 - v_y):.6g}",
                      ValidityWarning, stacklevel=2)
    pref = _prefactor(e2)
    wb = s.omega_break(quad)
    if s.is_zero or (epsilon == 1 and R == 0):
        res = _zero_result(wb)
        return (0.0, res) if full_output else 0.0

    halfwidth = quad.near_pole_exclusion_halfwidth
    tail = None
    if quad.omega_max is None:
        tail = (s.power_series().shift_power(-1) * _angular_tail_series(R, epsilon, wb)
                * groove_sum_series(n, T_z))

    def f(w):
        return (w * s.power(w) * angular_factor(w, R, epsilon)
                * groove_sum(w * T_z, n, halfwidth))

    upper = quad.omega_max if quad.omega_max is not None else wb
    # resonances (odd j) and zeros (even j) of the groove sum are panel edges
    j = np.arange(1, int(upper * T_z / math.pi) + 1)
    breaks = j * math.pi / T_z
    width = math.pi / max(s.duration, 2.0 * R)
    res = integrate_spectral(f, quad, omega_break=wb, tail=tail, breakpoints=breaks,
                             panel_width=width, subdivide=2 * n).scaled(pref)
    value = max(res.value, 0.0)
    return (value, res) if full_output else value


def _alternating_weights(n: int) -> np.ndarray:
    k = np.arange(1, 2 * n)
    return (2 * n - k) * np.where(k % 2 == 0, 1.0, -1.0)


def eta_closed(n_grooves: int, xi: float, T_z: float, e2: float, finite: bool = False) -> float:
    """Cross-steep correction ``eta``.

    By default the large-``N`` value ``e2 N (pi^2/3) (xi/T_z)^2``; with
    ``finite`` the exact alternating sum ``-e2 sum_{n != m} (-1)^{n+m} / (n-m)^2 (xi/T_z)^2``.
    """
    if int(n_grooves) != n_grooves or n_grooves < 1:
        raise ValidationError("groove count must be a positive integer")
    if not T_z > 0:
        raise ValidationError("T_z must be > 0")
    ratio2 = (xi / T_z) ** 2
    n = int(n_grooves)
    if not finite:
        return e2 * n * math.pi**2 / 3.0 * ratio2
    k = np.arange(1, 2 * n)
    total = 2.0 * float(np.sum(_alternating_weights(n) / k**2))
    return -e2 * total * ratio2


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _steep_pair_nodes(p: VelocityProfile, pieces: int):
    """Gauss-Legendre nodes/weights of ``int dt u0'(t)`` over the profile."""
    t = np.asarray(p.times)
    v = np.asarray(p.velocities)
    xs, ws = [], []
    for a, b in zip(t[:-1], t[1:]):
        edges = np.linspace(a, b, pieces + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_X
            xs.append(x)
            ws.append(0.5 * (hi - lo) * _GL_W * np.interp(x, t, v))
    return np.concatenate(xs), np.concatenate(ws)


def eta_timedomain(p: VelocityProfile, n_grooves: int, T_z: float, e2: float) -> float:
    """Cross-steep correction from the time-domain double integral.

    ``-e2 sum_{n != m} (-1)^{n+m} int int u0'(t) u0'(t') / (t - t' + T_z (n-m))^2``,
    each pair integral by tensor Gauss-Legendre quadrature over the linear pieces.
    """
    if int(n_grooves) != n_grooves or n_grooves < 1:
        raise ValidationError("groove count must be a positive integer")
    tau = p.duration
    if not T_z > tau:
        raise ValidationError(f"T_z = {T_z} must exceed tau_z = {tau}")
    if p.is_zero:
        return 0.0
    n = int(n_grooves)
    pieces = max(1, int(math.ceil(2.0 * tau / (T_z - tau))))
    x, w = _steep_pair_nodes(p, pieces)
    diff = (x[:, None] - x[None, :]).ravel()
    ww = (w[:, None] * w[None, :]).ravel()
    k = np.arange(1, 2 * n)
    shift = k * T_z
    fwd = (ww[None, :] / (diff[None, :] + shift[:, None]) ** 2).sum(axis=1)
    bwd = (ww[None, :] / (diff[None, :] - shift[:, None]) ** 2).sum(axis=1)
    return -e2 * float(np.sum(_alternating_weights(n) * (fwd + bwd)))


def visibility(W: float) -> float:
    """Fringe visibility ``|F| = exp(-W)``."""
    if not W >= 0:
        raise ValidationError(f"decoherence factor must be >= 0, got {W}")
    return math.exp(-W)


@dataclass(frozen=True)
class DecoherenceBreakdown:
    """Every quantity entering ``W_SP`` plus the diagnostics that qualify it."""

    mode: str
    e2: float
    n_grooves: int
    epsilon: int
    v_z: float
    tau_z: float
    T_z: float
    w_half_zz: float
    w_bb_zz: Optional[float]
    eta_closed: float
    eta_timedomain: Optional[float]
    w_plane: float
    attenuation: float
    w_sp: float
    visibility: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def delta_w(self) -> float:
        return self.w_sp - self.w_plane

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta_w"] = self.delta_w
        return d


def w_sp(g: GratingGeometry, beam: BeamConfig, w_plane: float = 0.0, mode: str = "approximate",
         attenuate: bool = False, quad: QuadratureSpec = DEFAULT_QUAD,
         proximity_threshold: float = 0.2) -> DecoherenceBreakdown:
    """Total decoherence factor above the grating.

    ``approximate``: ``W_SP = W_plane + 2 N W_half`` ; ``full``: the groove sum
    is kept, ``W_SP = W_plane + W_bb``. ``attenuate`` multiplies the grating
    term by ``exp(-4 pi z0 / d)``, a heuristic for heights beyond the
    proximity regime. ``eta`` is reported but never added.
    """
    if mode in ("approx",):
        mode = "approximate"
    if mode not in ("approximate", "full"):
        raise ValidationError(f"mode must be 'approximate' or 'full', got {mode!r}")
    if not w_plane >= 0:
        raise ValidationError(f"w_plane must be >= 0, got {w_plane}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        profile, t_z = profile_from_grating(g, beam, proximity_threshold)
    s = transform(profile)
    n = g.n_grooves
    eps = beam.epsilon
    tau = profile.duration
    v_z = 0.0 if profile.is_zero else displacement(profile) / tau

    wh, info_h = w_half_zz(s, beam.R, eps, beam.e2, quad, full_output=True)
    att = math.exp(-4.0 * math.pi * beam.z0 / g.d) if attenuate else 1.0
    bound_violated = two_r_bound_violated(beam.R, t_z, beam.v_y, eps)

    quad_report = {"w_half_zz": _integral_report(info_h)}
    wbb = None
    if mode == "full":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            wbb, info_b = w_bb_zz_full(s, beam.R, eps, n, t_z, beam.e2, quad, v_y=beam.v_y,
                                       full_output=True)
        quad_report["w_bb_zz"] = _integral_report(info_b)
        grating_term = wbb
    else:
        grating_term = 2 * n * wh
    total = w_plane + grating_term * att

    xi_eff = displacement(profile)
    eta = eta_closed(n, xi_eff, t_z, beam.e2)
    eta_td = eta_timedomain(profile, n, t_z, beam.e2) if not profile.is_zero else 0.0
    mean_w = mean_frequency(s, quad)

    diagnostics = {
        "proximity": proximity_flags(g, beam, proximity_threshold),
        "depth_not_small": g.flags["depth_not_small"],
        "two_r_bound_violated": bound_violated,
        "eta_over_2n_w_half": (eta / (2 * n * wh)) if wh > 0 else None,
        "mean_frequency": mean_w,
        "ky_vy_shift": beam.v_y * mean_w,
        "ky_vy_phase_per_period": beam.v_y * mean_w * t_z,
        "R_over_tau": beam.R / tau,
        "Tz_over_tau": t_z / tau,
        "omega_max": quad.omega_max,
        "quadrature": quad_report,
    }
    return DecoherenceBreakdown(
        mode=mode,
        e2=beam.e2,
        n_grooves=n,
        epsilon=eps,
        v_z=v_z,
        tau_z=tau,
        T_z=t_z,
        w_half_zz=wh,
        w_bb_zz=wbb,
        eta_closed=eta,
        eta_timedomain=eta_td,
        w_plane=w_plane,
        attenuation=att,
        w_sp=total,
        visibility=visibility(total),
        diagnostics=diagnostics,
    )


def _integral_report(info: SpectralIntegral) -> dict:
    return {
        "error_estimate": info.error,
        "converged": info.converged,
        "panels": info.n_panels,
        "omega_break": info.omega_break,
        "tail": info.tail,
        "tail_mode": info.tail_mode,
    }
