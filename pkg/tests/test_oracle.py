"""Oracles are checked first, against exact values and each other, before anything relies on them."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdecohere.errors import NonConvergentError, ValidationError
from spdecohere.oracle import (
    OracleResult,
    _Spectrum,
    angular_kernel_numeric,
    brute_groove_phasor,
    mc_w1osc,
    nested_w1osc,
    spectrum_direct,
    thread_count,
)
from spdecohere.profiles import (
    VelocityProfile,
    asymmetric_triangular_profile,
    triangular_profile,
    zero_profile,
)

GOLDEN = json.loads((Path(__file__).parent / "data" / "oracle_golden.json").read_text())
TRIANGLE_W = 4.0 / (3.0 * math.pi**2) * math.log(2.0)


def _profile(spec):
    if spec[0] == "tri":
        return triangular_profile(spec[1], spec[2])
    return asymmetric_triangular_profile(spec[1], spec[2], spec[3])


# ---- groove phasor -------------------------------------------------------

def test_brute_groove_zero_phase():
    assert brute_groove_phasor(0.0, 5) == 0.0


def test_brute_groove_resonance_n7():
    assert brute_groove_phasor(math.pi, 7) == pytest.approx(196.0, rel=1e-13)


def test_brute_groove_vectorized_matches_scalar():
    k = np.array([0.1, 1.7, 2.9])
    vec = brute_groove_phasor(k, 4)
    assert np.allclose(vec, [brute_groove_phasor(x, 4) for x in k], rtol=0, atol=0)


def test_brute_groove_rejects_bad_n():
    with pytest.raises(ValidationError):
        brute_groove_phasor(1.0, 0)
    with pytest.raises(ValidationError):
        brute_groove_phasor(1.0, 100_001)


@given(st.floats(0.0, 50.0), st.integers(1, 30))
def test_brute_groove_matches_literal_complex_sum(kappa, n):
    z = sum((-1) ** m * complex(math.cos(kappa * m), math.sin(kappa * m)) for m in range(2 * n))
    assert brute_groove_phasor(kappa, n) == pytest.approx(abs(z) ** 2, rel=1e-10, abs=1e-10)


# ---- independent spectrum and angular integral -----------------------------

@pytest.mark.parametrize("w", [0.05, 0.7, 1.3, 6.0, 40.0])
def test_oracle_spectrum_matches_direct_fourier_integral(w):
    p = asymmetric_triangular_profile(0.2, 1.3, 0.35)
    assert _Spectrum(p)(w)[0] == pytest.approx(spectrum_direct(p, w)[0], rel=1e-10, abs=1e-14)


def test_oracle_spectrum_at_zero_is_area():
    p = triangular_profile(0.3, 2.0)
    assert _Spectrum(p)(0.0)[0] == pytest.approx(0.6, rel=1e-15)


def test_angular_numeric_at_zero():
    assert angular_kernel_numeric(0.0) == pytest.approx(8.0 * math.pi / 3.0, rel=1e-14)


def test_angular_numeric_self_converged():
    # doubling the Gauss-Legendre order must not move the value
    a = 37.0
    x, w = np.polynomial.legendre.leggauss(400)
    ref = float(np.sum(w * math.pi * (1 + x**2) * np.cos(a * x)))
    assert angular_kernel_numeric(a) == pytest.approx(ref, rel=1e-12)


# ---- Monte Carlo -----------------------------------------------------------

def test_mc_zero_profile_is_exactly_zero():
    r = mc_w1osc(zero_profile(2.0), 1.0, -1, 1.0, 10_000, 3)
    assert r.estimate == 0.0 and r.std_error == 0.0


def test_mc_identical_gratings_at_zero_separation_is_exactly_zero():
    r = mc_w1osc(triangular_profile(0.2, 1.0), 0.0, 1, 1.0, 10_000, 3)
    assert r.estimate == 0.0


def test_mc_triangular_eps0_within_3_sigma_of_closed_form():
    v, e2 = 0.2, 0.7
    r = mc_w1osc(triangular_profile(v, 1.5), 0.0, 0, e2, 400_000, 21)
    exact = TRIANGLE_W * e2 * v * v
    assert abs(r.estimate - exact) <= 3 * r.std_error


def test_mc_bitwise_repeatable_and_thread_independent():
    p = triangular_profile(0.3, 1.0)
    a = mc_w1osc(p, 1.0, -1, 1.0, 150_000, 99, threads=1)
    b = mc_w1osc(p, 1.0, -1, 1.0, 150_000, 99, threads=4)
    c = mc_w1osc(p, 1.0, -1, 1.0, 150_000, 99, threads=3)
    assert a == b == c
    d = mc_w1osc(p, 1.0, -1, 1.0, 150_000, 100)
    assert d.estimate != a.estimate


def test_mc_std_error_scales_as_inverse_sqrt_samples():
    p = triangular_profile(0.2, 1.0)
    errs = [mc_w1osc(p, 0.5, -1, 1.0, n, 5).std_error for n in (10_000, 100_000, 1_000_000)]
    for lo, hi in zip(errs, errs[1:]):
        assert lo / hi == pytest.approx(math.sqrt(10.0), rel=0.15)


def test_mc_rejects_small_sample_and_jumps():
    with pytest.raises(ValidationError):
        mc_w1osc(triangular_profile(0.2, 1.0), 0.0, 0, 1.0, 9_999, 1)
    jumpy = VelocityProfile((0.0, 1.0), (0.5, 0.5), open_ends=True)
    with pytest.raises(NonConvergentError):
        mc_w1osc(jumpy, 0.0, 0, 1.0, 10_000, 1)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("SPDECOHERE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("SPDECOHERE_THREADS", "x")
    with pytest.raises(ValidationError):
        thread_count()


# ---- nested quadrature -------------------------------------------------------

def test_nested_eps0_reproduces_closed_form():
    v, e2 = 0.25, 1.3
    r = nested_w1osc(triangular_profile(v, 0.8), 0.0, 0, e2, 1e-7)
    assert r.converged
    assert r.estimate == pytest.approx(TRIANGLE_W * e2 * v * v, rel=1e-7)


def test_nested_agrees_with_mc():
    p = asymmetric_triangular_profile(0.2, 1.0, 0.6)
    n = nested_w1osc(p, 0.8, -1, 1.0)
    m = mc_w1osc(p, 0.8, -1, 1.0, 400_000, 8)
    assert abs(n.estimate - m.estimate) <= 3 * m.std_error


def test_nested_trivial_cases_and_validation():
    assert nested_w1osc(zero_profile(), 1.0, 0, 1.0).estimate == 0.0
    assert nested_w1osc(triangular_profile(0.1, 1.0), 0.0, 1, 1.0).estimate == 0.0
    with pytest.raises(ValidationError):
        nested_w1osc(triangular_profile(0.1, 1.0), 0.0, 0, 1.0, tol=1e-8)


def test_nested_deterministic():
    p = triangular_profile(0.2, 1.0)
    assert nested_w1osc(p, 1.5, 1, 1.0) == nested_w1osc(p, 1.5, 1, 1.0)


def test_oracle_result_rejects_negative_error():
    with pytest.raises(ValidationError):
        OracleResult(1.0, -1e-3, 10)


# ---- golden regression data ---------------------------------------------------

@pytest.mark.parametrize("case", GOLDEN["cases"], ids=lambda c: c["name"])
def test_golden_monte_carlo(case):
    p = _profile(case["profile"])
    r = mc_w1osc(p, case["R"], case["epsilon"], case["e2"], case["samples"], case["seed"])
    assert r.estimate == pytest.approx(case["mc_estimate"], rel=1e-12)
    assert r.std_error == pytest.approx(case["mc_std_error"], rel=1e-10)


@pytest.mark.parametrize("case", GOLDEN["cases"], ids=lambda c: c["name"])
def test_golden_nested(case):
    p = _profile(case["profile"])
    r = nested_w1osc(p, case["R"], case["epsilon"], case["e2"], 1e-7)
    assert r.estimate == pytest.approx(case["nested_estimate"], rel=1e-10)


@pytest.mark.parametrize("case", GOLDEN["groove"], ids=lambda c: f"k{c['kappa']}_N{c['N']}")
def test_golden_groove(case):
    assert brute_groove_phasor(case["kappa"], case["N"]) == pytest.approx(case["value"], rel=1e-13)
