"""Numerical kernels for the frequency integrals.

Everything the decoherence integrals need beyond the profile spectrum lives
here: the closed-form angular kernel of the k-space integral, the alternating
groove phasor sum, and an adaptive Gauss-Kronrod integrator on ``[0, omega_break]``
whose tail beyond ``omega_break`` is integrated exactly from an asymptotic
power-times-exponential expansion of the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import sici

from .errors import NonConvergentError, ToleranceNotMetError, ValidationError

__all__ = [
    "QuadratureSpec",
    "PowerTrigSeries",
    "SpectralIntegral",
    "angular_kernel",
    "angular_kernel_series",
    "groove_sum",
    "groove_sum_series",
    "integrate_spectral",
    "power_exp_tail",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation controls for ``integrate_spectral``.

    ``max_subdivisions`` bounds the number of adaptive refinement rounds (each
    round bisects every panel that still carries a significant share of the
    error). ``omega_max`` replaces the automatic tail by a hard cutoff; it is
    echoed in every result that used it.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 0.0
    max_subdivisions: int = 60
    omega_max: Optional[float] = None
    near_pole_exclusion_halfwidth: float = 1e-6
    break_factor: float = 50.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValidationError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.abs_tol < 0:
            raise ValidationError(f"abs_tol must be >= 0, got {self.abs_tol}")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ValidationError("max_subdivisions must be an integer >= 1")
        if self.omega_max is not None and not self.omega_max > 0:
            raise ValidationError("omega_max must be positive when given")
        if not self.near_pole_exclusion_halfwidth >= 0:
            raise ValidationError("near_pole_exclusion_halfwidth must be >= 0")
        if not self.break_factor > 0:
            raise ValidationError("break_factor must be > 0")

    def with_tol(self, rel_tol: float) -> "QuadratureSpec":
        return QuadratureSpec(
            rel_tol=rel_tol,
            abs_tol=self.abs_tol,
            max_subdivisions=self.max_subdivisions,
            omega_max=self.omega_max,
            near_pole_exclusion_halfwidth=self.near_pole_exclusion_halfwidth,
            break_factor=self.break_factor,
        )


DEFAULT_QUAD = QuadratureSpec()


# --------------------------------------------------------------------------
# Angular kernel and groove sum
# --------------------------------------------------------------------------

_ANGULAR_SWITCH = 0.5


def angular_kernel(a):
    """Solid-angle integral ``A(a) = int dOmega (1 - n_z^2) cos(a n_x)``.

    Closed form ``2 pi [sin a / a + ((a^2 - 2) sin a + 2 a cos a) / a^3]``,
    with its even Taylor series below ``a = 0.5`` where the closed form cancels.
    ``A(0) = 8 pi / 3``; the kernel is even in ``a``.
    """
    a = np.abs(np.asarray(a, dtype=float))
    out = np.empty_like(a)
    small = a < _ANGULAR_SWITCH
    if np.any(small):
        x2 = a[small] ** 2
        acc = np.zeros_like(x2)
        term = np.ones_like(x2)  # (-1)^n a^{2n} / (2n)!
        for n in range(12):
            acc += term * 2.0 * (1.0 / (2 * n + 1) + 1.0 / (2 * n + 3))
            term = -term * x2 / ((2 * n + 1) * (2 * n + 2))
        out[small] = np.pi * acc
    big = ~small
    if np.any(big):
        x = a[big]
        s, c = np.sin(x), np.cos(x)
        out[big] = 2.0 * np.pi * (s / x + ((x * x - 2.0) * s + 2.0 * x * c) / x**3)
    return out if out.ndim else float(out)


# Cody-Waite split of pi: the first two parts have short mantissas so j * part is exact
_PI_A = float.fromhex("0x1.921fb00000000p+1")
_PI_B = float.fromhex("0x1.5110b40000000p-21")
_PI_C = float.fromhex("0x1.8469898cc5170p-47")


def _offset_from_pi_multiple(k, j):
    """``k - j pi`` for integer-valued ``j``, accurate to a few ulps of the result."""
    exact = np.abs(j) < 2.0**20
    r = ((k - j * _PI_A) - j * _PI_B) - j * _PI_C
    return np.where(exact, r, k - j * np.pi)


def groove_sum(kappa, n_grooves: int, near_pole_halfwidth: float = 1e-6):
    """``S(kappa, N) = |sum_{n<2N} (-1)^n e^{i kappa n}|^2``.

    Evaluated as ``sin^2(N delta) / sin^2(delta / 2)`` with ``delta`` the
    distance to the nearest resonance ``kappa = (2j+1) pi``; inside
    ``near_pole_halfwidth`` of a resonance the second-order expansion of the
    limit ``4 N^2`` is used. The result always lies in ``[0, 4 N^2]``.
    """
    if int(n_grooves) != n_grooves or n_grooves < 1:
        raise ValidationError(f"groove count must be a positive integer, got {n_grooves}")
    n = int(n_grooves)
    k = np.asarray(kappa, dtype=float)
    # offsets from the nearest resonance (odd multiple of pi) and the nearest zero (even multiple)
    delta = _offset_from_pi_multiple(k, 2.0 * np.floor(k / (2.0 * np.pi)) + 1.0)
    delta0 = _offset_from_pi_multiple(k, 2.0 * np.round(k / (2.0 * np.pi)))
    num = np.where(np.abs(delta) <= 0.5 * np.pi, np.sin(n * delta), np.sin(n * delta0)) ** 2
    den = np.sin(0.5 * delta) ** 2
    near = np.abs(delta) < near_pole_halfwidth
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(near, 0.0, num / np.where(near, 1.0, den))
    limit = 4.0 * n * n * (1.0 - (4.0 * n * n - 1.0) * delta**2 / 12.0)
    out = np.where(near, limit, out)
    out = np.clip(out, 0.0, 4.0 * n * n)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Power-times-exponential series and their exact tails
# --------------------------------------------------------------------------


def power_exp_tail(power, freq, omega0: float):
    """Exact ``int_{omega0}^inf w^{-p} e^{i b w} dw`` for integer ``p`` (vectorized).

    Non-oscillatory terms need ``p >= 2``; oscillatory ones ``p >= 1``.
    Uses upward integration-by-parts recursion from the sine/cosine integrals
    for ``|b| omega0 <= 80`` and the asymptotic expansion above.
    """
    p = np.asarray(power, dtype=int)
    b = np.asarray(freq, dtype=float)
    p, b = np.broadcast_arrays(p, b)
    p = p.ravel()
    b = b.ravel()
    if omega0 <= 0:
        raise ValidationError("tail start must be positive")
    if np.any((b == 0) & (p <= 1)) or np.any(p <= 0):
        raise NonConvergentError("tail integral diverges (non-decaying term)")
    out = np.zeros(p.shape, dtype=complex)
    x = np.abs(b) * omega0

    zero = b == 0
    out[zero] = omega0 ** (1.0 - p[zero]) / (p[zero] - 1.0)

    mid = (~zero) & (x <= 80.0)
    if np.any(mid):
        bm, pm, xm = b[mid], p[mid], x[mid]
        si, ci = sici(xm)
        e = -ci + 1j * (0.5 * np.pi - si)
        e = np.where(bm > 0, e, np.conj(e))
        phase = np.exp(1j * bm * omega0)
        for q in range(2, int(pm.max()) + 1):
            step = omega0 ** (1.0 - q) * phase / (q - 1.0) + 1j * bm / (q - 1.0) * e
            e = np.where(pm >= q, step, e)
        out[mid] = e

    far = (~zero) & (x > 80.0)
    if np.any(far):
        bf, pf = b[far], p[far].astype(float)
        z = 1j * bf * omega0
        term = np.ones(bf.shape, dtype=complex)
        acc = np.zeros(bf.shape, dtype=complex)
        for j in range(80):
            acc += term
            term = term * (pf + j) / z
            if np.max(np.abs(term)) < 1e-18:
                break
        out[far] = (1j / bf) * omega0 ** (-pf) * np.exp(1j * bf * omega0) * acc
    return out


class PowerTrigSeries:
    """Function ``g(w) = sum_j c_j w^{-p_j} exp(i b_j w)`` for ``w > 0``.

    Used to represent integrands exactly for large ``w`` so that the tail
    ``int_{omega0}^inf g`` can be taken in closed form.
    """

    __slots__ = ("coef", "power", "freq")

    def __init__(self, coef, power, freq):
        coef = np.asarray(coef, dtype=complex).ravel()
        power = np.asarray(power, dtype=int).ravel()
        freq = np.asarray(freq, dtype=float).ravel()
        keep = coef != 0
        self.coef = coef[keep]
        self.power = power[keep]
        self.freq = freq[keep]

    @classmethod
    def constant(cls, value) -> "PowerTrigSeries":
        return cls([value], [0], [0.0])

    def __len__(self):
        return self.coef.size

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        flat = w.reshape(-1, 1)
        vals = (self.coef * flat ** (-self.power.astype(float)) * np.exp(1j * self.freq * flat)).sum(axis=1)
        return vals.reshape(w.shape)

    def __mul__(self, other):
        if not isinstance(other, PowerTrigSeries):
            return PowerTrigSeries(self.coef * other, self.power, self.freq)
        coef = np.multiply.outer(self.coef, other.coef)
        power = np.add.outer(self.power, other.power)
        freq = np.add.outer(self.freq, other.freq)
        return PowerTrigSeries(coef, power, freq).compress()

    __rmul__ = __mul__

    def __add__(self, other: "PowerTrigSeries"):
        return PowerTrigSeries(
            np.concatenate([self.coef, other.coef]),
            np.concatenate([self.power, other.power]),
            np.concatenate([self.freq, other.freq]),
        ).compress()

    def conj(self) -> "PowerTrigSeries":
        return PowerTrigSeries(np.conj(self.coef), self.power, -self.freq)

    def shift_power(self, dp: int) -> "PowerTrigSeries":
        """Multiply by ``w^{-dp}``."""
        return PowerTrigSeries(self.coef, self.power + dp, self.freq)

    def compress(self) -> "PowerTrigSeries":
        """Merge terms sharing the same power and frequency."""
        if self.coef.size < 2:
            return self
        scale = float(np.max(np.abs(self.freq))) or 1.0
        key_f = np.round(self.freq / scale, 12)
        keys = np.stack([self.power.astype(float), key_f], axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        coef = np.zeros(uniq.shape[0], dtype=complex)
        np.add.at(coef, inv, self.coef)
        freq = np.zeros(uniq.shape[0])
        np.add.at(freq, inv, self.freq)
        counts = np.bincount(inv, minlength=uniq.shape[0])
        freq /= counts
        power = uniq[:, 0].astype(int)
        mag = np.abs(coef)
        keep = mag > 1e-15 * (mag.max() if mag.size else 0.0)
        return PowerTrigSeries(coef[keep], power[keep], freq[keep])

    def tail(self, omega0: float) -> complex:
        """``int_{omega0}^inf g(w) dw``."""
        if self.coef.size == 0:
            return 0.0j
        e = power_exp_tail(self.power, self.freq, omega0)
        return complex(np.sum(self.coef * e))

    def tail_roundoff(self, omega0: float) -> float:
        """Floating-point error estimate of ``tail`` (per-branch error model)."""
        if self.coef.size == 0:
            return 0.0
        p = self.power.astype(float)
        x = np.abs(self.freq) * omega0
        base = np.abs(self.coef) * omega0 ** (1.0 - p)
        fact = np.array([math.factorial(max(int(q) - 1, 0)) for q in self.power], dtype=float)
        mid = base * np.maximum(x, 1.0) ** (p - 2.0) / fact
        err = np.where(x == 0, base, np.where(x <= 80.0, mid, base / np.maximum(x, 1.0)))
        return float(16 * _EPS * np.sum(err))


def angular_kernel_series(radius: float) -> PowerTrigSeries:
    """Exact representation of ``A(2 R w)`` as a ``PowerTrigSeries`` in ``w`` (R > 0)."""
    r = 2.0 * radius
    # A(a) = 2 pi [2 sin a / a + 2 cos a / a^2 - 2 sin a / a^3], a = r w
    s1 = 1.0 / (2j * r)
    c2 = 1.0 / (2.0 * r * r)
    s3 = 1.0 / (2j * r**3)
    coef = 2.0 * np.pi * np.array([2 * s1, -2 * s1, 2 * c2, 2 * c2, -2 * s3, 2 * s3])
    power = [1, 1, 2, 2, 3, 3]
    freq = [r, -r, r, -r, r, -r]
    return PowerTrigSeries(coef, power, freq)


def groove_sum_series(n_grooves: int, period: float) -> PowerTrigSeries:
    """``S(w T, N)`` written as ``sum_k (2N - |k|) (-1)^k e^{i k T w}``."""
    n2 = 2 * int(n_grooves)
    k = np.arange(-(n2 - 1), n2)
    coef = (n2 - np.abs(k)) * np.where(k % 2 == 0, 1.0, -1.0)
    return PowerTrigSeries(coef, np.zeros_like(k), k * float(period))


# --------------------------------------------------------------------------
# Adaptive Gauss-Kronrod integration
# --------------------------------------------------------------------------

# 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525452064, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG_FULL = np.zeros(21)
_gauss_idx = [1, 3, 5, 7, 9]
for _i, _w in zip(_gauss_idx, _WG):
    _WG_FULL[_i] = _w
    _WG_FULL[20 - _i] = _w

_CHUNK = 40_000


def _gk21(f, a, b):
    """Kronrod estimates and QUADPACK-style error estimates on panels [a, b]."""
    vals = np.empty(a.size)
    errs = np.empty(a.size)
    for lo in range(0, a.size, _CHUNK):
        aa = a[lo:lo + _CHUNK]
        bb = b[lo:lo + _CHUNK]
        c = 0.5 * (aa + bb)
        h = 0.5 * (bb - aa)
        x = c[:, None] + h[:, None] * _NODES[None, :]
        fx = np.asarray(f(x), dtype=float).reshape(x.shape)
        k = h * (fx @ _WK)
        g = h * (fx @ _WG_FULL)
        mean = k / np.where(h == 0, 1.0, 2.0 * h)
        resasc = h * (np.abs(fx - mean[:, None]) @ _WK)
        resabs = h * (np.abs(fx) @ _WK)
        err = np.abs(k - g)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
        err = np.where((resasc != 0) & (err != 0), scaled, err)
        err = np.maximum(err, 50.0 * _EPS * resabs)
        vals[lo:lo + _CHUNK] = k
        errs[lo:lo + _CHUNK] = err
    return vals, errs


class SpectralIntegral(NamedTuple):
    """Result of ``integrate_spectral``; unpacks as ``(value, error, ...)``."""

    value: float
    error: float
    converged: bool
    n_panels: int
    omega_break: float
    tail: float
    tail_mode: str  # "exact", "bounded", "cutoff" or "none"

    def scaled(self, factor: float) -> "SpectralIntegral":
        return self._replace(value=self.value * factor, error=self.error * abs(factor),
                             tail=self.tail * factor)


def _initial_edges(upper, breakpoints, panel_width, subdivide):
    pts = [np.array([0.0, upper])]
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float)
        pts.append(bp[(bp > 0) & (bp < upper)])
    if panel_width is not None and panel_width > 0:
        n = int(math.ceil(upper / panel_width))
        if n > 1:
            pts.append(np.linspace(0.0, upper, n + 1))
    edges = np.unique(np.concatenate(pts))
    if subdivide > 1:
        frac = np.arange(subdivide) / subdivide
        left = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * frac[None, :]
        edges = np.append(left.ravel(), edges[-1])
    return edges


def integrate_spectral(
    f: Callable[[np.ndarray], np.ndarray],
    quad: QuadratureSpec = DEFAULT_QUAD,
    *,
    omega_break: float = 50.0,
    tail: Optional[PowerTrigSeries] = None,
    breakpoints: Optional[Sequence[float]] = None,
    panel_width: Optional[float] = None,
    subdivide: int = 1,
    strict: bool = False,
) -> SpectralIntegral:
    """Integrate ``f`` over ``(0, inf)``.

    ``[0, omega_break]`` is covered by adaptive GK21 panels; ``breakpoints``
    (e.g. groove-sum resonances) are always panel boundaries and every initial
    panel is split ``subdivide`` times. For ``w > omega_break`` the integrand
    must match ``tail``, whose integral is added exactly. Without a tail series
    the remainder is not added but bounded by ``C / (2 omega_break^2)``, with
    ``C`` the largest ``|f| w^3`` sampled on ``[0.8, 1] omega_break``, and that bound goes
    into the error estimate. ``quad.omega_max`` forces a hard cutoff instead.
    """
    if quad.omega_max is not None:
        upper = float(quad.omega_max)
        tail_mode = "cutoff"
    else:
        upper = float(omega_break)
        tail_mode = "exact" if tail is not None else "bounded"
    if not upper > 0:
        raise ValidationError("integration range must be positive")

    tail_value = 0.0
    tail_err = 0.0
    if tail_mode == "exact":
        if len(tail) == 0:
            tail_mode = "none"
        else:
            tail_c = tail.tail(upper)
            tail_value = float(tail_c.real)
            tail_err = tail.tail_roundoff(upper) + abs(tail_c.imag)
    elif tail_mode == "bounded":
        probe = np.linspace(0.8 * upper, upper, 65)
        c = float(np.max(np.abs(np.asarray(f(probe), dtype=float)) * probe**3))
        tail_err = c / (2.0 * upper**2)

    edges = _initial_edges(upper, breakpoints, panel_width, int(subdivide))
    a, b = edges[:-1], edges[1:]
    vals, errs = _gk21(f, a, b)

    converged = False
    for _ in range(int(quad.max_subdivisions) + 1):
        total = float(np.sum(vals)) + tail_value
        err_total = float(np.sum(errs)) + tail_err
        tol = max(quad.abs_tol, quad.rel_tol * abs(total))
        if err_total <= tol:
            converged = True
            break
        if _ == quad.max_subdivisions:
            break
        # when the tail error dominates, still bring the panels to half the tolerance
        panel_target = tol - tail_err if tail_err < 0.5 * tol else 0.5 * tol
        if float(np.sum(errs)) <= panel_target:
            break
        budget = float(np.sum(errs)) - 0.5 * panel_target
        order = np.argsort(errs)[::-1]
        cum = np.cumsum(errs[order])
        n_split = int(np.searchsorted(cum, budget) + 1)
        split = np.zeros(a.size, dtype=bool)
        split[order[:n_split]] = True
        mid = 0.5 * (a[split] + b[split])
        na = np.concatenate([a[split], mid])
        nb = np.concatenate([mid, b[split]])
        nv, ne = _gk21(f, na, nb)
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        order = np.argsort(a, kind="stable")
        a, b, vals, errs = a[order], b[order], vals[order], errs[order]

    total = float(np.sum(vals)) + tail_value
    err_total = float(np.sum(errs)) + tail_err
    if not converged and strict:
        raise ToleranceNotMetError(
            f"requested tolerance not reached (estimate {total!r} +/- {err_total!r})",
            total, err_total,
        )
    return SpectralIntegral(total, err_total, converged, int(a.size), upper, tail_value, tail_mode)
