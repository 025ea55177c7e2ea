import numpy as np
import pytest

from ehltvd.ehl import (GAUSS_SEIDEL, JACOBI_DISTRIBUTED, LOAD, EhlConfig, ehl_residual,
                        film_summary, freeze_limiter, hertz_pressure, lcp_residual,
                        line_gs_limited, line_jacobi_distributed, load_integral, make_state,
                        pfas_cycle, refresh, select_splitting, solve_ehl,
                        update_h00)
from ehltvd.grid import make_hierarchy
from ehltvd.physics import resolve_moes


def _small(hybrid="hs1", radius=1, seed=0):
    hier = make_hierarchy((-1.0, 1.0, -0.5, 0.5), (9, 5), 1)
    cfg = EhlConfig(physics=resolve_moes(20, 10), hierarchy=hier, hybrid=hybrid,
                    window_radius=radius, direct_film=True)
    lv = hier.finest
    rng = np.random.default_rng(seed)
    u = hertz_pressure(lv) * (1 + 0.3 * rng.random(lv.shape))
    u[2, 2] = 0.0  # one cavitated point
    st = make_state(lv, cfg, u=u, H00=0.2)
    st.rhs_f1.values = 0.01 * rng.standard_normal(lv.shape)
    refresh(st, cfg)
    return st, cfg


def _oracle_line(st, cfg, j, hs2, radius):
    """Plain-python re-assembly of the GS line linearisation."""
    lv = st.level
    nx = lv.nx
    hx, hy = lv.hx, lv.hy
    e = st.eps.values
    rho = st.rho
    g = st.table.g
    phi = np.clip(freeze_copy(st, cfg), 0.0, 2.0)
    r = ehl_residual(st, cfg).values
    n = nx - 2
    A = np.zeros((n, n))
    b = r[1:-1, j].copy()
    for i in range(1, nx - 1):
        m = i - 1
        aw = 0.5 * (e[i, j] + e[i - 1, j]) * hy / hx
        ae = 0.5 * (e[i, j] + e[i + 1, j]) * hy / hx
        as_ = 0.5 * (e[i, j] + e[i, j - 1]) * hx / hy
        an = 0.5 * (e[i, j] + e[i, j + 1]) * hx / hy
        A[m, m] -= aw + ae + as_ + an
        if i > 1:
            A[m, m - 1] += aw
        if i < nx - 2:
            A[m, m + 1] += ae
        cf = 1 + 0.5 * phi[i, j] + (0.5 * phi[i - 1, j] if hs2 else 0.0)
        for k, sign in ((i, 1.0), (i - 1, -1.0)):
            for l in range(1, nx - 1):
                if abs(k - l) <= radius:
                    A[m, l - 1] -= hy * cf * sign * rho[k, j] * g[abs(k - l), 0]
        if st.u.values[i, j] <= st.lower_f2.values[i, j] and b[m] >= 0:
            A[m, :] = 0.0
            A[m, m] = 1.0
            b[m] = 0.0
    return np.linalg.solve(A, b)


def freeze_copy(st, cfg):
    freeze_limiter(st, cfg)
    phi = st.phi_frozen.copy()
    st.phi_frozen = None
    return phi


@pytest.mark.parametrize("hybrid,radius", [("hs1", 1), ("hs2", 1), ("hs1", 2), ("hs2", 3)])
def test_line_system_against_dense_oracle(hybrid, radius):
    st, cfg = _small(hybrid, radius)
    for j in (1, 2, 3):
        sigma = line_gs_limited(st, j, cfg)
        np.testing.assert_allclose(sigma, _oracle_line(st, cfg, j, hybrid == "hs2", radius),
                                   rtol=1e-10, atol=1e-13)


def test_zero_residual_gives_zero_change():
    st, cfg = _small()
    st.rhs_f1.values = st.rhs_f1.values - ehl_residual(st, cfg).values
    assert np.abs(ehl_residual(st, cfg).values).max() < 1e-14
    for j in (1, 2, 3):
        assert np.abs(line_gs_limited(st, j, cfg)).max() < 1e-12


def test_zero_limiter_is_first_order_upwind():
    st, cfg = _small()
    st.phi_frozen = np.zeros(st.level.shape)
    r = ehl_residual(st, cfg).values
    st2, _ = _small()
    q = st2.rho * st2.H.values
    lv = st.level
    hx, hy = lv.hx, lv.hy
    e, u = st2.eps.values, st2.u.values
    for i, j in ((1, 1), (4, 2), (7, 3)):
        diff = (hy / hx * (0.5 * (e[i, j] + e[i + 1, j]) * (u[i + 1, j] - u[i, j])
                           - 0.5 * (e[i, j] + e[i - 1, j]) * (u[i, j] - u[i - 1, j]))
                + hx / hy * (0.5 * (e[i, j] + e[i, j + 1]) * (u[i, j + 1] - u[i, j])
                             - 0.5 * (e[i, j] + e[i, j - 1]) * (u[i, j] - u[i, j - 1])))
        lu = diff - hy * (q[i, j] - q[i - 1, j])
        assert r[i, j] == pytest.approx(st2.rhs_f1.values[i, j] - lu, rel=1e-12, abs=1e-15)


def test_select_splitting():
    h = 0.1
    assert select_splitting(0.61 * h, h, h) == GAUSS_SEIDEL
    assert select_splitting(0.6 * h, h, h) == JACOBI_DISTRIBUTED
    assert select_splitting(0.0, h, h) == JACOBI_DISTRIBUTED


def test_update_h00():
    st, cfg = _small()
    st.u.values[:] = 0.0
    assert update_h00(st, cfg) == pytest.approx(0.2 - cfg.c_h00 * LOAD)
    st.u.values[:] = LOAD / (st.level.hx * st.level.hy * st.u.values.size)
    assert load_integral(st) == pytest.approx(LOAD)
    assert update_h00(st, cfg) == pytest.approx(0.2)


def test_lcp_residual_masks_active_points():
    st, cfg = _small()
    r = ehl_residual(st, cfg)
    lr = lcp_residual(st, r)
    assert lr[2, 2] == min(r.values[2, 2], 0.0)
    assert lr[4, 2] == r.values[4, 2]


def test_jacobi_sweep_respects_obstacle():
    st, cfg = _small()
    sigma = line_jacobi_distributed(st, cfg)
    assert sigma.values.shape == st.level.shape
    assert st.u.values.min() >= 0.0
    assert np.all(st.u.values[0] == 0) and np.all(st.u.values[:, -1] == 0)


def test_config_validation():
    hier = make_hierarchy((-1.0, 1.0), 9, 1)
    phys = resolve_moes(20, 10)
    for bad in (dict(c_h00=0.5), dict(hybrid="hs3"), dict(omega_gs=0.0),
                dict(window_radius=0), dict(cycle=(0, 0, "V", 3)), dict(switch_threshold=0)):
        with pytest.raises(ValueError):
            EhlConfig(physics=phys, hierarchy=hier, **bad)
    with pytest.raises(ValueError):
        EhlConfig.for_case(20, 10, finest_n=100)
    with pytest.raises(ValueError):
        EhlConfig(physics=phys, hierarchy=make_hierarchy((-1.0, 1.0, -0.5, 0.5), 9, 1))


def _two_level(cycles=30, tol=1e-10):
    return EhlConfig(physics=resolve_moes(20, 10),
                     hierarchy=make_hierarchy((-2.5, 2.5), 17, 2),
                     cycle=(2, 1, "V", cycles), tol=tol)


@pytest.mark.slow
def test_two_level_pfas_contraction():
    cfg = _two_level()
    st, rep = solve_ehl(cfg)
    hist = rep.level_histories[-1]
    ratios = [b / a for a, b in zip(hist[3:15], hist[4:16])]
    assert max(ratios) <= 0.5
    assert load_integral(st) == pytest.approx(LOAD, rel=1e-4)


@pytest.mark.slow
def test_converged_state_is_cycle_fixed_point():
    cfg = _two_level(cycles=60, tol=1e-11)
    st, rep = solve_ehl(cfg)
    # rebuild the level stack around the converged fine state and cycle once more
    coarse = make_state(cfg.hierarchy[0], cfg)
    before = st.u.values.copy()
    h00 = st.H00
    pfas_cycle([coarse, st], cfg, 1)
    assert np.abs(st.u.values - before).max() < 1e-8 * before.max()
    assert abs(st.H00 - h00) < 1e-8


@pytest.mark.slow
def test_converged_answer_independent_of_splitting():
    out = []
    for kw in (dict(hybrid="hs1"), dict(hybrid="hs2"), dict(window_radius=2)):
        cfg = EhlConfig.for_case(20, 10, finest_n=65, cycle=(2, 1, "V", 40), tol=1e-9, **kw)
        st, _ = solve_ehl(cfg)
        out.append(film_summary(st))
    out = np.array(out)
    assert np.ptp(out, axis=0).max() < 1e-6


@pytest.mark.slow
def test_solution_invariants_small():
    cfg = _two_level(cycles=40, tol=1e-9)
    st, rep = solve_ehl(cfg)
    assert st.u.values.min() == 0.0
    st.check_projection()
    r = ehl_residual(st, cfg).values
    assert np.abs(st.u.values * r).max() <= 1e-6 * np.abs(r).max()
    hm, hc = film_summary(st)
    assert 0 < hm < hc
    assert len(rep.orders) == 0 and rep.norms[0] is None
