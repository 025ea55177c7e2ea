import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehltvd.limiters import (KINDS, LIMITED_KINDS, LimiterSpec, advect_tv_history,
                             harten_tvd_check, kappa_flux_1d, kappa_stencil, limiter_phi,
                             ratio_r, total_variation)


def test_ratio_linear_and_extremum():
    r0, r1 = ratio_r(0, 1, 2, 3)
    assert r0 == pytest.approx(1.0, rel=1e-12) and r1 == pytest.approx(1.0, rel=1e-12)
    assert ratio_r(0, 0, 1, 0)[0] <= 0


def test_flat_jump_annihilates_limiter_term():
    inc = kappa_flux_1d(1.0, 2.0, 2.0, 5.0, LimiterSpec("superbee"))
    assert inc.plus == 0.0
    assert np.isfinite(inc.phi_0)


def test_named_values():
    assert limiter_phi(LimiterSpec("minmod"), 0.5) == 0.5
    assert limiter_phi(LimiterSpec("minmod"), 2.0) == 1.0
    assert limiter_phi(LimiterSpec("vanleer"), 1.0) == 1.0
    for kind in LIMITED_KINDS:
        assert limiter_phi(LimiterSpec(kind), -1.0) == 0.0


@pytest.mark.parametrize("kind", LIMITED_KINDS)
@given(r=st.floats(-1e6, 1e6, allow_nan=False))
def test_tvd_region(kind, r):
    phi = limiter_phi(LimiterSpec(kind), r)
    assert phi >= 0.0
    if r <= 0:
        assert phi == 0.0
    else:
        assert phi <= min(2 * r, 2.0) + 1e-12


@pytest.mark.parametrize("kind", LIMITED_KINDS)
def test_second_order_at_one(kind):
    assert limiter_phi(LimiterSpec(kind), 1.0) == pytest.approx(1.0, abs=1e-15)


def test_spec_validation():
    with pytest.raises(ValueError):
        LimiterSpec("nope")
    with pytest.raises(ValueError):
        LimiterSpec("kappa_fixed", 1.5)
    assert LimiterSpec.parse("kappa_fixed(0.5)") == LimiterSpec("kappa_fixed", 0.5)
    assert LimiterSpec.parse("MinMod").kind == "minmod"


@given(st.floats(-1, 1), st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_kappa_increments_match_stencil(kappa, u):
    # the unlimited scheme written as phi(r) increments must reproduce the
    # four-point kappa stencil for any data
    spec = LimiterSpec("kappa_fixed", kappa)
    u_mm, u_m, u_0, u_p = u
    if min(abs(u_0 - u_m), abs(u_m - u_mm)) < 1e-6:
        return
    inc = kappa_flux_1d(u_mm, u_m, u_0, u_p, spec)
    ref = kappa_stencil(kappa) @ np.array([u_mm, u_m, u_0, u_p])
    assert inc.total == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_kappa_third_on_cubic():
    x = np.array([-2.0, -1.0, 0.0, 1.0])
    u = 1 + x - 0.5 * x ** 2 + 0.2 * x ** 3
    inc = kappa_flux_1d(*u, LimiterSpec("kappa_fixed", 1 / 3))
    assert inc.total == pytest.approx(kappa_stencil(1 / 3) @ u, rel=1e-13)


def test_zero_limiter_is_upwind_and_minus_one_is_second_order_upwind():
    u = (0.3, 1.1, 2.6, 2.9)
    assert LimiterSpec("minmod").is_limited
    inc = kappa_flux_1d(*u, LimiterSpec("minmod"))
    assert inc.first_order == u[2] - u[1]
    up2 = kappa_flux_1d(*u, LimiterSpec("kappa_fixed", -1.0))
    assert up2.phi_0 == 1.0 and up2.phi_m == 1.0
    assert up2.total == pytest.approx(1.5 * u[2] - 2 * u[1] + 0.5 * u[0])


def test_harten():
    assert harten_tvd_check([0.3] * 4, [0.4] * 4)
    assert not harten_tvd_check([0.3, -0.1], [0.4, 0.4])
    assert harten_tvd_check([0.5], [0.5])
    with pytest.raises(ValueError):
        harten_tvd_check([0.1], [0.1, 0.2])


def test_total_variation():
    assert total_variation(np.linspace(0, 1, 11)) == pytest.approx(1.0)
    assert total_variation(np.ones(5)) == 0.0
    assert total_variation([0, 0, 1, 1, 0]) == 2.0


def _step():
    u = np.zeros(200)
    u[20:60] = 1.0
    return u


@pytest.mark.parametrize("kind", LIMITED_KINDS)
def test_limited_advection_tvd(kind):
    tv, _ = advect_tv_history(_step(), LimiterSpec(kind), 100, 0.5)
    assert np.all(np.diff(tv) <= 1e-12)


@pytest.mark.parametrize("kappa", [1 / 3, 0.0, -1.0])
def test_unlimited_kappa_not_tvd(kappa):
    tv, u = advect_tv_history(_step(), LimiterSpec("kappa_fixed", kappa), 100, 0.5)
    assert tv.max() > tv[0] + 1e-3
    assert u.max() > 1.0 + 1e-3 or u.min() < -1e-3


def test_kind_menu():
    assert KINDS[0] == "kappa_fixed" and len(KINDS) == 6
