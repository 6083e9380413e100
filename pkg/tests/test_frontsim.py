import numpy as np
import pytest
from oracles import HR4_SPEED, hr4_phi

from pulsefront.errors import CFLViolation, MultipleCrossings, NoCrossing, PeriodicityDefect, SpeedDrift
from pulsefront.frontsim import (
    FrontState,
    InitialDatum,
    SimConfig,
    default_dt,
    extract_profile,
    front_position,
    relax_to_front,
    s_derivative,
    step,
)

H = 1 / 32


def state(u, h=H, x_offset=0.0, t=0.0):
    return FrontState(t, x_offset, np.asarray(u, dtype=float), h)


@pytest.mark.parametrize("scheme", ["explicit", "imex"])
def test_zero_state_is_stationary_away_from_the_clamp(kpp, scheme):
    dt = default_dt(kpp, H, scheme)
    out = step(state(np.zeros(256)), dt, kpp, scheme)
    # the window is clamped to 1 on the left, which only feeds in from the edge
    assert np.all(out.u[64:] < 1e-12)
    if scheme == "explicit":
        assert np.all(out.u[2:] == 0.0)


def test_one_state_is_stationary(hr4):
    dt = default_dt(hr4, H, "explicit")
    out = step(state(np.ones(256)), dt, hr4, "explicit")
    assert np.allclose(out.u[:-2], 1.0, atol=1e-12)


def test_uniform_half_follows_the_logistic_ode(kpp):
    dt = default_dt(kpp, H, "explicit")
    out = step(state(np.full(256, 0.5)), dt, kpp, "explicit")
    assert np.allclose(out.u[2:-2], 0.5 + 0.25 * dt, atol=dt**2)


def test_explicit_step_rejects_cfl_violation(kpp):
    with pytest.raises(CFLViolation):
        step(state(np.zeros(64)), 10 * default_dt(kpp, H, "explicit"), kpp, "explicit")


def test_unknown_scheme(kpp):
    with pytest.raises(ValueError):
        step(state(np.zeros(64)), 1e-3, kpp, "rk4")


def test_front_position_of_exact_profile():
    h = 1 / 64
    x = np.arange(0, 30, h)
    assert front_position(state(hr4_phi(x - 10.0), h)) == pytest.approx(10.0, abs=h)


def test_front_position_of_step():
    x = np.arange(0, 10, H)
    assert front_position(state(np.where(x < 3.2, 1.0, 0.0))) == pytest.approx(3.2, abs=H)


def test_constant_state_has_no_crossing():
    with pytest.raises(NoCrossing):
        front_position(state(np.full(64, 0.7)))


def test_two_fronts_are_rejected():
    x = np.arange(0, 10, H)
    with pytest.raises(MultipleCrossings):
        front_position(state(np.where((x < 3) | ((x > 5) & (x < 6)), 1.0, 0.0)))


def test_datum_kinds():
    x = np.linspace(-2, 2, 9)
    assert np.array_equal(InitialDatum("heaviside", 0.5)(x), (x < 0.5).astype(float))
    assert np.allclose(InitialDatum("exponential", 0.0, 2.0)(x), np.minimum(1, np.exp(-2 * x)))
    assert np.allclose(InitialDatum("callable", func=np.cos)(x), np.cos(x))
    with pytest.raises(ValueError):
        InitialDatum("bump")(x)


def test_s_derivative_exact_on_quadratics():
    s = np.linspace(0, 1, 11)
    d = s_derivative((s**2)[:, None], 0.1)
    assert np.allclose(d[1:-1, 0], 2 * s[1:-1])


def synthetic_snapshots(c, h, L, count, t0=0.0, width=40.0):
    """Exact HR4 front translating at speed c, sampled at t0 + j h / c on a fixed lab grid."""
    x = np.arange(-20.0, width - 20.0, h)
    out = []
    for j in range(count):
        t = t0 + j * h / c
        out.append(FrontState(t, x[0], hr4_phi(x - c * t), h))
    return out


def test_extract_profile_recovers_closed_form():
    h = 1 / 32
    snaps = synthetic_snapshots(HR4_SPEED, h, h, 2)
    prof = extract_profile(snaps, HR4_SPEED, h, correct_drift=False)
    assert np.max(np.abs(prof.phi[:, 0] - hr4_phi(prof.s_grid))) < 1e-6
    assert prof.s_half == pytest.approx(0.0, abs=1e-3)


def test_extract_profile_constant_medium_rows_identical():
    h = 1 / 16
    snaps = synthetic_snapshots(HR4_SPEED, h, 1.0, 32)
    prof = extract_profile(snaps, HR4_SPEED, 1.0, correct_drift=False)
    assert prof.m == 16
    assert np.max(np.ptp(prof.phi, axis=1)) < 1e-6


def test_extract_profile_shift_equivariant():
    h = 1 / 16
    snaps = synthetic_snapshots(HR4_SPEED, h, 1.0, 48)
    a = extract_profile(snaps[:32], HR4_SPEED, 1.0, correct_drift=False)
    b = extract_profile(snaps[16:48], HR4_SPEED, 1.0, correct_drift=False)
    inside = (b.s_grid >= a.s_grid[0]) & (b.s_grid <= a.s_grid[-1])
    assert inside.sum() > 100
    assert np.allclose(a(b.s_grid[inside, None], b.xi[None, :]), b.phi[inside], atol=1e-9)


def test_extract_profile_flags_inconsistent_periods():
    h = 1 / 16
    snaps = synthetic_snapshots(HR4_SPEED, h, 1.0, 32)
    snaps[20].u = snaps[20].u + 1e-2
    with pytest.raises(PeriodicityDefect):
        extract_profile(snaps, HR4_SPEED, 1.0, correct_drift=False)


def test_extract_profile_needs_grid_aligned_times():
    h = 1 / 16
    snaps = synthetic_snapshots(HR4_SPEED, h, 1.0, 16)
    snaps[3].t += 0.3 * h
    with pytest.raises(ValueError):
        extract_profile(snaps, HR4_SPEED, 1.0)


def test_kpp_speed(kpp_run):
    _, est = kpp_run
    assert abs(est.c_hat - 2.0) / 2.0 <= 0.02


def test_hr4_speed(hr4_run):
    _, est = hr4_run
    assert abs(est.c_hat - HR4_SPEED) / HR4_SPEED <= 0.01


def test_hr4_speed_exponential_datum(hr4_exp_runs):
    for _, est in hr4_exp_runs.values():
        assert abs(est.c_hat - HR4_SPEED) / HR4_SPEED <= 0.01


def test_relaxed_profile_matches_closed_form(hr4_run):
    prof, _ = hr4_run
    s = prof.s_grid - prof.s_half
    keep = np.abs(s) < 10
    assert np.max(np.abs(prof.phi[keep, 0] - hr4_phi(s[keep]))) < 1e-3


def test_states_stay_monotone(hr4_step_run):
    _, est = hr4_step_run
    for st in est.trajectory:
        assert np.all(np.diff(st.u) <= 1e-12)


def test_translation_equivariance(hr4):
    cfg = SimConfig(h=1 / 16, width=20, T=20, drift_tol=1.0)
    _, a = relax_to_front(hr4, InitialDatum("heaviside", 0.0), cfg)
    _, b = relax_to_front(hr4, InitialDatum("heaviside", 3.0), cfg)
    assert np.allclose(b.samples[:, 1] - a.samples[:, 1], 3.0, atol=1e-9)
    assert b.c_hat == pytest.approx(a.c_hat, abs=1e-9)


def test_speed_independent_of_window_width(hr4):
    c = [relax_to_front(hr4, InitialDatum("heaviside"), SimConfig(h=1 / 32, width=w, T=40, drift_tol=1e-2))[1].c_hat for w in (30, 60)]
    assert abs(c[0] - c[1]) / c[1] <= 0.002


def test_short_pulled_run_reports_drift(kpp):
    with pytest.raises(SpeedDrift):
        relax_to_front(kpp, InitialDatum("heaviside"), SimConfig(h=1 / 16, width=30, T=30))


def test_speed_insensitive_to_tracking_level(hr4):
    c = [
        relax_to_front(hr4, InitialDatum("heaviside"), SimConfig(h=1 / 32, width=30, T=40, level=lv, drift_tol=1e-2))[1].c_hat
        for lv in (0.3, 0.7)
    ]
    assert abs(c[0] - c[1]) / c[1] < 1e-3


def test_relaxed_profile_limits_and_monotonicity(hr4_run):
    prof, _ = hr4_run
    assert np.all(np.abs(prof.phi[0] - 1) < 1e-6) and np.all(prof.phi[-1] < 1e-6)
    inner = (prof.phi >= 1e-8) & (prof.phi <= 1 - 1e-8)
    inner[[0, -1]] = False
    assert np.all(prof.phi_s[inner] < 0)
