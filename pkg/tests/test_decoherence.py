import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdecohere.decoherence import (
    E2_PRESETS,
    FINE_STRUCTURE,
    angular_factor,
    eta_closed,
    eta_timedomain,
    two_r_bound_violated,
    visibility,
    w_bb_zz_full,
    w_half_zz,
    w_sp,
)
from spdecohere.errors import NonConvergentError, ValidationError, ValidityWarning
from spdecohere.profiles import (
    BeamConfig,
    GratingGeometry,
    VelocityProfile,
    asymmetric_triangular_profile,
    transform,
    triangular_profile,
    zero_profile,
)
from spdecohere.quadrature import DEFAULT_QUAD, QuadratureSpec

TRIANGLE_W = 4.0 / (3.0 * math.pi**2) * math.log(2.0)


def test_presets():
    assert E2_PRESETS["gaussian"] == FINE_STRUCTURE
    assert E2_PRESETS["heaviside"] == pytest.approx(4 * math.pi * FINE_STRUCTURE)


def test_angular_factor_values():
    assert angular_factor(3.0, 1.0, 0) == pytest.approx(2 * math.pi / 3)
    assert angular_factor(0.0, 1.0, -1) == pytest.approx(8 * math.pi / 3)
    assert angular_factor(0.0, 1.0, 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValidationError):
        angular_factor(1.0, 1.0, 2)


@given(st.floats(0.0, 1e3), st.floats(0.0, 50.0))
def test_angular_factors_average_to_eps0(w, R):
    # G(+1) + G(-1) = 4 G(0) pointwise
    total = angular_factor(w, R, 1) + angular_factor(w, R, -1)
    assert total == pytest.approx(4 * angular_factor(w, R, 0), rel=1e-13)


def test_w_half_closed_form():
    w = w_half_zz(triangular_profile(0.2, 1.0), 0.0, 0, 1.0)
    assert w == pytest.approx(TRIANGLE_W * 0.04, rel=1e-10)


def test_w_half_limits_at_zero_separation():
    s = transform(triangular_profile(0.2, 1.0))
    base = w_half_zz(s, 0.0, 0, 1.0)
    assert w_half_zz(s, 0.0, 1, 1.0) == 0.0
    assert w_half_zz(s, 0.0, -1, 1.0) == pytest.approx(4 * base, rel=1e-12)
    assert w_half_zz(s, 1e-9, 1, 1.0) / base < 1e-12


@given(st.floats(0.0, 30.0))
def test_eps_curves_symmetric_about_two(r):
    s = transform(triangular_profile(0.1, 1.0))
    base = w_half_zz(s, r, 0, 1.0)
    total = w_half_zz(s, r, 1, 1.0) + w_half_zz(s, r, -1, 1.0)
    assert total / base == pytest.approx(4.0, rel=1e-8)


def test_w_half_full_output_and_zero():
    val, info = w_half_zz(triangular_profile(0.2, 1.0), 2.0, -1, 1.0, full_output=True)
    assert info.converged and info.error < 1e-8 * val and info.tail_mode == "exact"
    assert w_half_zz(zero_profile(), 1.0, -1, 1.0) == 0.0


def test_w_half_validation():
    p = triangular_profile(0.2, 1.0)
    with pytest.raises(ValidationError):
        w_half_zz(p, -1.0, 0, 1.0)
    with pytest.raises(ValidationError):
        w_half_zz(p, 1.0, 0, 0.0)
    with pytest.raises(NonConvergentError):
        w_half_zz(VelocityProfile((0.0, 1.0), (0.2, 0.2), open_ends=True), 0.0, 0, 1.0)


def test_cutoff_mode_underestimates_and_is_echoed():
    p = triangular_profile(0.2, 1.0)
    val, info = w_half_zz(p, 0.0, 0, 1.0, QuadratureSpec(omega_max=20.0), full_output=True)
    assert info.tail_mode == "cutoff" and info.omega_break == 20.0
    assert val < w_half_zz(p, 0.0, 0, 1.0)


def test_full_groove_sum_matches_time_domain_correction():
    # at eps = 0: W_bb - 2N W_half = eta_td / (12 pi^2) exactly
    p = triangular_profile(1.0, 1.0)
    n, t_z = 5, 10.0
    wh = w_half_zz(p, 0.0, 0, 1.0)
    wb = w_bb_zz_full(p, 0.0, 0, n, t_z, 1.0, QuadratureSpec(rel_tol=1e-11))
    eta = eta_timedomain(p, n, t_z, 1.0)
    assert wb - 2 * n * wh == pytest.approx(eta / (12 * math.pi**2), rel=1e-6)


def test_full_mode_asymmetric_profile_close_to_approximation():
    p = asymmetric_triangular_profile(0.2, 1.0, 0.3)
    ratio = w_bb_zz_full(p, 2.0, -1, 4, 50.0, 1.0) / (8 * w_half_zz(p, 2.0, -1, 1.0))
    assert ratio == pytest.approx(1.0, abs=1e-3)


def test_full_mode_validation_and_warning():
    p = triangular_profile(0.2, 1.0)
    with pytest.raises(ValidationError):
        w_bb_zz_full(p, 0.0, 0, 3, 0.5, 1.0)
    with pytest.raises(ValidationError):
        w_bb_zz_full(p, 0.0, 0, 0, 10.0, 1.0)
    with pytest.warns(ValidityWarning):
        w_bb_zz_full(p, 6.0, -1, 2, 10.0, 1.0, v_y=0.1)
    assert two_r_bound_violated(6.0, 10.0, 0.1, -1)
    assert not two_r_bound_violated(6.0, 10.0, 0.1, 0)


def test_eta_closed_and_finite():
    lead = eta_closed(50, 1.0, 100.0, 1.0)
    assert lead == pytest.approx(50 * math.pi**2 / 3 * 1e-4)
    finite = eta_closed(50, 1.0, 100.0, 1.0, finite=True)
    assert finite / lead == pytest.approx(0.9916, abs=5e-4)
    assert eta_closed(4000, 1.0, 100.0, 1.0, finite=True) / eta_closed(4000, 1.0, 100.0, 1.0) == pytest.approx(1.0, abs=2e-4)


def test_eta_timedomain_tends_to_finite_sum():
    p = triangular_profile(0.1, 1.0)
    td = eta_timedomain(p, 10, 1e4, 1.0)
    assert td == pytest.approx(eta_closed(10, 0.1, 1e4, 1.0, finite=True), rel=1e-6)
    assert eta_timedomain(zero_profile(), 10, 100.0, 1.0) == 0.0


def test_visibility():
    assert visibility(0.0) == 1.0
    assert visibility(1.0) == pytest.approx(math.exp(-1.0))
    with pytest.raises(ValidationError):
        visibility(-0.1)


# ---- assembly ---------------------------------------------------------------------

def _setup(theta=math.atan(math.sqrt(0.1) / 0.1), n=1000, eps=0, R=20.0):
    return (GratingGeometry(n, 20.0, 1.0, theta),
            BeamConfig(0.1, R, 3.0, eps, E2_PRESETS["heaviside"]))


def test_w_sp_flat_conductor():
    g, b = _setup(theta=0.0, eps=-1)
    br = w_sp(g, b, w_plane=0.3)
    assert br.w_sp == 0.3 and br.visibility == pytest.approx(math.exp(-0.3))
    assert br.delta_w == 0.0


def test_w_sp_approximate_is_2n_w_half():
    g, b = _setup()
    br = w_sp(g, b, w_plane=0.1)
    assert br.w_sp == pytest.approx(0.1 + 2000 * br.w_half_zz, rel=1e-14)
    assert br.w_bb_zz is None
    assert br.diagnostics["eta_over_2n_w_half"] < 0.05
    d = br.to_dict()
    assert d["delta_w"] == pytest.approx(2000 * br.w_half_zz)


def test_w_sp_attenuation():
    g, b = _setup(n=10)
    plain = w_sp(g, b)
    att = w_sp(g, b, attenuate=True)
    assert att.w_sp == pytest.approx(plain.w_sp * math.exp(-4 * math.pi * 3.0 / 20.0), rel=1e-14)


def test_w_sp_full_mode_close_to_approximate():
    g, b = _setup(n=20)
    full = w_sp(g, b, mode="full")
    approx = w_sp(g, b, mode="approx")
    assert full.w_sp / approx.w_sp == pytest.approx(1.0, abs=1e-3)
    assert "w_bb_zz" in full.diagnostics["quadrature"]


def test_w_sp_validity_flag():
    g, b = _setup(n=10, eps=-1, R=100.0)
    assert w_sp(g, b).diagnostics["two_r_bound_violated"]


def test_w_sp_rejects_bad_mode_and_plane():
    g, b = _setup(n=10)
    with pytest.raises(ValidationError):
        w_sp(g, b, mode="exact")
    with pytest.raises(ValidationError):
        w_sp(g, b, w_plane=-1.0)


def test_w_sp_is_thread_safe():
    from concurrent.futures import ThreadPoolExecutor
    g, b = _setup(n=10, eps=-1, R=5.0)
    ref = w_sp(g, b).w_sp
    with ThreadPoolExecutor(4) as ex:
        vals = list(ex.map(lambda _: w_sp(g, b).w_sp, range(8)))
    assert all(v == ref for v in vals)
