"""Brute-force reference evaluations of the k-space decoherence integral.

Nothing here reuses the semi-analytic machinery of ``profiles``,
``quadrature`` or ``decoherence``: the spectrum is rebuilt from the kink
expansion, the angular integral is done numerically and the frequency
integrals go through scipy. The oracles are slow by design and exist to
check the fast path.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import NonConvergentError, ValidationError
from .profiles import VelocityProfile

__all__ = [
    "OracleResult",
    "mc_w1osc",
    "nested_w1osc",
    "brute_groove_phasor",
    "angular_kernel_numeric",
    "spectrum_direct",
    "thread_count",
]

MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleResult:
    """Estimate with its standard error (Monte Carlo) or error bound (deterministic)."""

    estimate: float
    std_error: float
    samples_or_panels: int
    seed: Optional[int] = None
    converged: bool = True

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValidationError("std_error must be >= 0")


def thread_count() -> int:
    """Worker threads: ``SPDECOHERE_THREADS`` if set, else the CPU count."""
    env = os.environ.get("SPDECOHERE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"SPDECOHERE_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return max(1, os.cpu_count() or 1)


# --------------------------------------------------------------------------
# Spectrum of a piecewise-linear profile, built independently
# --------------------------------------------------------------------------

class _Spectrum:
    """``F(w)`` from slope jumps (large ``w``) and a moment series (small ``w``)."""

    _NTAYLOR = 30

    def __init__(self, p: VelocityProfile):
        t = np.asarray(p.times, dtype=float)
        v = np.asarray(p.velocities, dtype=float)
        if v[0] != 0.0 or v[-1] != 0.0:
            raise NonConvergentError("velocity jumps make the decoherence integral diverge")
        self.tau = float(t[-1])
        slopes = np.concatenate([[0.0], np.diff(v) / np.diff(t), [0.0]])
        self.t = t
        self.jump = np.diff(slopes)
        # moments m_n = int t^n u(t) dt, polynomial integrals over each linear piece
        m = np.zeros(self._NTAYLOR)
        for a, b, va, vb in zip(t[:-1], t[1:], v[:-1], v[1:]):
            beta = (vb - va) / (b - a)
            alpha = va - beta * a
            n = np.arange(self._NTAYLOR)
            m += alpha * (b ** (n + 1) - a ** (n + 1)) / (n + 1) + beta * (b ** (n + 2) - a ** (n + 2)) / (n + 2)
        self.moments = m
        self.l1 = float(np.sum(0.5 * (np.abs(v[1:]) + np.abs(v[:-1])) * np.diff(t)))
        self.kink_norm = float(np.sum(np.abs(self.jump)))
        self.kink_sq = float(np.sum(self.jump**2))
        self.zero = bool(np.all(v == 0.0))

    def __call__(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        out = np.empty(w.shape, dtype=complex)
        low = np.abs(w) * self.tau < 1.0
        if np.any(low):
            z = 1j * w[low]
            acc = np.zeros(z.shape, dtype=complex)
            term = np.ones(z.shape, dtype=complex)
            for n in range(self._NTAYLOR):
                acc += term * self.moments[n]
                term = term * z / (n + 1)
            out[low] = acc
        hi = ~low
        if np.any(hi):
            wh = w[hi]
            out[hi] = -(np.exp(1j * np.outer(wh, self.t)) @ self.jump) / wh**2
        return out

    def power(self, w):
        f = self(w)
        return f.real**2 + f.imag**2


def spectrum_direct(p: VelocityProfile, omega, tol: float = 1e-12) -> np.ndarray:
    """``F(w) = int u0'(t) e^{i w t} dt`` by adaptive quadrature of the profile itself."""
    out = []
    for w in np.atleast_1d(np.asarray(omega, dtype=float)):
        re = im = 0.0
        for a, b in zip(p.times[:-1], p.times[1:]):
            re += integrate.quad(lambda t: float(p(t)) * math.cos(w * t), a, b,
                                 epsabs=0, epsrel=tol, limit=500)[0]
            im += integrate.quad(lambda t: float(p(t)) * math.sin(w * t), a, b,
                                 epsabs=0, epsrel=tol, limit=500)[0]
        out.append(complex(re, im))
    return np.asarray(out)


# --------------------------------------------------------------------------
# Angular integrals, x axis as the polar axis: n_x = u, n_z = sqrt(1-u^2) cos(phi)
# --------------------------------------------------------------------------

_PHI_NODES = 2.0 * np.pi * np.arange(16) / 16.0  # trapezoid, exact for the trig polynomial below


def _azimuthal(u):
    """``int_0^{2 pi} (1 - n_z^2) dphi`` at fixed ``u`` (periodic trapezoid rule)."""
    u = np.asarray(u, dtype=float)
    c2 = np.cos(_PHI_NODES) ** 2
    vals = 1.0 - (1.0 - u[..., None] ** 2) * c2
    return vals.mean(axis=-1) * 2.0 * np.pi


def angular_kernel_numeric(a: float) -> float:
    """``int dOmega (1 - n_z^2) cos(a n_x)`` by 2D numeric quadrature."""
    n = int(48 + 1.2 * abs(a))
    x, wts = np.polynomial.legendre.leggauss(n)
    return float(np.sum(wts * _azimuthal(x) * np.cos(a * x)))


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

def _mc_chunk(spec: _Spectrum, R: float, epsilon: int, seed: int, index: int, n: int,
              omega_c: float):
    rng = np.random.Generator(np.random.Philox(key=seed).jumped(index))
    u1 = 1.0 - rng.random(n)  # (0, 1]
    upper = rng.random(n) < 0.5
    w = np.where(upper, omega_c / np.sqrt(u1), omega_c * np.sqrt(u1))
    # uniform directions
    cz = 2.0 * rng.random(n) - 1.0
    phi = 2.0 * np.pi * rng.random(n)
    sz = np.sqrt(1.0 - cz * cz)
    nx = sz * np.cos(phi)
    env = w * np.minimum(spec.l1**2, (spec.kink_norm / w**2) ** 2)
    ratio = w * spec.power(w) / env
    phase = np.exp(1j * w * R * nx)
    pair = np.abs(0.5 * (phase - epsilon * np.conj(phase))) ** 2
    x = ratio * (1.0 - cz * cz) * pair
    return float(x.sum()), float((x * x).sum())


def mc_w1osc(p: VelocityProfile, R: float, epsilon: int, e2: float, samples: int,
             seed: int, threads: Optional[int] = None) -> OracleResult:
    """Monte Carlo over ``d^3k`` with an importance density for ``w``.

    The density is proportional to ``w min(L1^2, D^2 / w^4)`` with ``L1 = int |u0'|``
    and ``D`` the summed slope jumps, both rigorous bounds on ``|F|``. Results do
    not depend on ``threads``: chunk ``i`` always draws from the Philox stream
    ``seed`` jumped ``i`` times and partial sums are combined in chunk order.
    """
    if samples < 10_000:
        raise ValidationError("Monte Carlo oracle needs at least 1e4 samples")
    if epsilon not in (-1, 0, 1):
        raise ValidationError("epsilon must be -1, 0 or +1")
    if not R >= 0 or not e2 > 0:
        raise ValidationError("need R >= 0 and e2 > 0")
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    spec = _Spectrum(p)
    if spec.zero or (epsilon == 1 and R == 0):
        return OracleResult(0.0, 0.0, samples, seed)
    omega_c = math.sqrt(spec.kink_norm / spec.l1)
    z = spec.l1**2 * omega_c**2  # total envelope mass
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    workers = threads or thread_count()
    jobs = [(spec, R, epsilon, seed, i, n, omega_c) for i, n in enumerate(sizes)]
    if workers == 1:
        parts = [_mc_chunk(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda j: _mc_chunk(*j), jobs))
    s1 = s2 = 0.0
    for a, b in parts:
        s1 += a
        s2 += b
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    scale = e2 / (2.0 * math.pi) ** 3 * z * 4.0 * math.pi
    return OracleResult(scale * mean, scale * math.sqrt(var / (samples - 1)), samples, seed)


# --------------------------------------------------------------------------
# Deterministic nested quadrature
# --------------------------------------------------------------------------

_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


def _composite(f, a, b, width, graded: bool = False):
    n = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    if graded and 0.0 < a < width:
        # Phi(q/w) varies on the scale w ~ q: geometric panels from a up to a + width
        k = int(math.ceil(math.log2((a + width) / a)))
        geo = a * 2.0 ** np.arange(1, k)
        edges = np.concatenate([[a], geo[geo < a + width], a + width + np.linspace(0.0, b - a - width, n)])
    half = 0.5 * np.diff(edges)
    x = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * _GL16_X
    return float(np.sum(half[:, None] * _GL16_W * f(x.ravel()).reshape(x.shape))), n


def nested_w1osc(p: VelocityProfile, R: float, epsilon: int, e2: float,
                 tol: float = 1e-7) -> OracleResult:
    """Deterministic nested quadrature over ``(w, u = n_x, phi)``.

    Expanding ``|(e^{i k_x R} - eps e^{-i k_x R})/2|^2 = ((1+eps^2) - 2 eps cos(2 k_x R))/4``
    splits the integral into a direction-independent part and a cosine part.
    For the latter ``q = w u`` is taken as outer variable, which turns the
    oscillation into a single cosine weight ``cos(2 R q)`` for scipy's QAWO:
    ``int dq cos(2 R q) H(q)`` with ``H(q) = int_{|q|}^inf dw |F|^2 Phi(q/w)``.
    """
    if tol < 1e-7:
        raise ValidationError("nested oracle tolerance must be >= 1e-7")
    if epsilon not in (-1, 0, 1):
        raise ValidationError("epsilon must be -1, 0 or +1")
    if not R >= 0 or not e2 > 0:
        raise ValidationError("need R >= 0 and e2 > 0")
    spec = _Spectrum(p)
    if spec.zero or (epsilon == 1 and R == 0):
        return OracleResult(0.0, 0.0, 0)
    tau = spec.tau
    pref = e2 / (2.0 * math.pi) ** 3
    lag_min = float(np.min(np.diff(spec.t)))
    panel = 0.5 * math.pi / tau

    # direction-independent part: int w |F|^2 dw * int du Phi(u)
    omega0 = 2000.0 / tau
    m_num, n0 = _composite(lambda w: w * spec.power(w), 0.0, omega0, panel)
    m_coarse, _ = _composite(lambda w: w * spec.power(w), 0.0, omega0, 2.0 * panel)
    moment = m_num + spec.kink_sq / (2.0 * omega0**2)  # mean of |F|^2 w^4 is sum D^2
    moment_err = abs(m_num - m_coarse) + spec.kink_norm**2 / (lag_min * omega0**3)
    xu, wu = np.polynomial.legendre.leggauss(8)
    solid = float(np.sum(wu * _azimuthal(xu)))
    c0 = moment * solid
    c0_err = moment_err * solid
    if epsilon == 0:
        value = 0.25 * c0
        err = 0.25 * c0_err
        return OracleResult(pref * value, pref * err, n0, None, err <= tol * abs(value))

    if R == 0.0:
        ccos, ccos_err, npan = c0, c0_err, n0
    else:
        ccos, ccos_err, npan = _cosine_part(spec, R, tol, panel)
    value = 0.25 * (1 + epsilon * epsilon) * c0 - 0.5 * epsilon * ccos
    err = 0.25 * (1 + epsilon * epsilon) * c0_err + 0.5 * ccos_err
    return OracleResult(pref * value, pref * err, n0 + npan, None, err <= tol * abs(value))


def _cosine_part(spec: _Spectrum, R: float, tol: float, panel: float,
                 reach: float = 200.0, q_max: float = 300.0):
    tau = spec.tau
    reach = reach / tau
    kink_sq = spec.kink_sq

    def h(q):
        q = abs(q)
        top = q + reach
        val, _ = _composite(lambda w: spec.power(w) * _azimuthal(q / w), q, top, panel, graded=True)
        # mean tail: |F|^2 ~ sum D^2 / w^4, Phi(u) = pi (1 + u^2) from the azimuthal rule
        phi = _azimuthal(np.array([0.0, q / top]))
        return val + kink_sq * (phi[0] / 3.0 + (phi[1] - phi[0]) / 5.0) / top**3

    q_max = q_max / tau
    limit = int(200 + 4 * q_max * tau + 2 * R * q_max / math.pi)
    val, err = integrate.quad(h, 0.0, q_max, weight="cos", wvar=2.0 * R, limit=limit,
                              epsabs=0.0, epsrel=0.1 * tol)
    # tail beyond q_max with H(q) ~ sum D^2 * (8 pi / 15) / q^3
    c_tail = kink_sq * 8.0 * math.pi / 15.0

    def tail(q):
        return c_tail / q**3

    tail_val, tail_err = integrate.quad(tail, q_max, np.inf, weight="cos", wvar=2.0 * R)
    resid = kink_sq / (tau * q_max**3)
    return 2.0 * (val + tail_val), 2.0 * (err + tail_err + resid), limit


# --------------------------------------------------------------------------
# Groove phasor
# --------------------------------------------------------------------------

def brute_groove_phasor(kappa, n_grooves: int):
    """``|sum_{n=0}^{2N-1} (-1)^n e^{i kappa n}|^2`` by literal accumulation.

    Phases and partial sums are carried in extended precision (``longdouble``)
    so the reference is not limited by the rounding of ``kappa * n``.
    """
    if int(n_grooves) != n_grooves or not 1 <= n_grooves <= 100_000:
        raise ValidationError("groove count must be an integer in [1, 1e5]")
    ld = np.longdouble
    k = np.atleast_1d(np.asarray(kappa, dtype=float)).astype(ld)
    two_pi = ld(2) * np.arccos(ld(-1))
    re = np.zeros(k.shape, dtype=ld)
    im = np.zeros(k.shape, dtype=ld)
    sign = ld(1)
    for n in range(2 * int(n_grooves)):
        ph = np.remainder(k * ld(n), two_pi)
        re += sign * np.cos(ph)
        im += sign * np.sin(ph)
        sign = -sign
    out = (re * re + im * im).astype(float)
    return float(out[0]) if np.ndim(kappa) == 0 else out
