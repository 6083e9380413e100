"""End-to-end acceptance checks.  Each records one PASS/FAIL line, echoed in the terminal summary."""
import numpy as np
from oracles import HR4_LAM_PLUS, HR4_LAM_STAR, HR4_SPEED, SQRT2, hr4_exact

from pulsefront.asymptotics import classify, fit_tail, log_slope, verify_pushed_asymptotics
from pulsefront.envelopes import (
    align_profiles,
    build_lower_ladder,
    build_stability_envelope,
    build_upper_ladder,
    check_envelope,
    check_ladder,
    fit_shift,
    spectral_data,
)
from pulsefront.errors import VerificationFailed
from pulsefront.frontsim import FrontState, default_dt, step
from pulsefront.medium import MediumSpec, holder_constants, make_medium
from pulsefront.spectral import compute_c0, dispersion_roots, k_of_lambda, kernel_residual

CRITERIA = {
    1: "constant-coefficient spectrum",
    2: "dispersion roots",
    3: "pushed speed",
    4: "tail rate and modulation",
    5: "log-derivative plateau",
    6: "pulled control",
    7: "periodic medium",
    8: "ladder certificates",
    9: "stability with shift",
    10: "uniqueness up to translation",
    11: "kernel residual",
    12: "comparison principle",
}
RESULTS: dict[int, str] = {}


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"acceptance {n:2d} {CRITERIA[n]:<30} {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def roots_and_samples(medium, c):
    rs = dispersion_roots(medium, 64, c)
    return rs, [k_of_lambda(medium, 64, lam) for lam in rs.roots]


def test_constant_coefficient_spectrum():
    rng = np.random.default_rng(20261015)
    worst_k = worst_c = 0.0
    for lam, q in zip(rng.uniform(0.05, 3.0, 20), rng.uniform(-1.0, 1.0, 20)):
        med = make_medium(MediumSpec("kpp_logistic", {"q": float(q)}))
        worst_k = max(worst_k, abs(k_of_lambda(med, 256, lam).k - (-(lam**2) - lam * q - 1.0)))
        worst_c = max(worst_c, abs(compute_c0(med, 64).c0 - (2.0 + q)))
    verdict(1, worst_k <= 1e-8 and worst_c <= 1e-6, f"max |k error| {worst_k:.2e}, max |c0 error| {worst_c:.2e}")


def test_dispersion_roots(kpp):
    pushed = dispersion_roots(kpp, 64, 3 / SQRT2)
    tangent = dispersion_roots(kpp, 64, 2.0)
    err = max(abs(pushed.roots[0] - 0.707107), abs(pushed.roots[1] - 1.414214)) if len(pushed.roots) == 2 else np.inf
    ok = err <= 1e-6 and tangent.tangent and len(tangent.roots) == 1 and abs(tangent.roots[0] - 1.0) <= 1e-6
    verdict(2, ok, f"roots {tuple(round(r, 7) for r in pushed.roots)}, tangent {tangent.roots}")


def test_pushed_speed(hr4_run, hr4_run_fine):
    coarse = abs(hr4_run[1].c_hat - HR4_SPEED) / HR4_SPEED
    fine = abs(hr4_run_fine[1].c_hat - HR4_SPEED) / HR4_SPEED
    verdict(3, coarse <= 0.01 and fine <= 0.0025, f"rel error h=1/256 {coarse:.2e}, h=1/512 {fine:.2e}")


def test_tail_rate_and_modulation(hr4, hr4_run):
    profile, est = hr4_run
    _, (star, plus) = roots_and_samples(hr4, est.c_hat)
    fit = fit_tail(profile, [star, plus])
    rate_err = abs(fit.lambda_hat - SQRT2) / SQRT2
    exclusion = fit.candidate_cv[star.lam] / fit.candidate_cv[plus.lam]
    try:
        report = verify_pushed_asymptotics(profile, fit, star, plus)
    except VerificationFailed as err:
        report = err.report
    ok = rate_err <= 0.02 and exclusion >= 5 and report.ratio_spread <= 0.02
    verdict(4, ok, f"lambda_hat {fit.lambda_hat:.5f}, exclusion x{exclusion:.1f}, ratio spread {report.ratio_spread:.2e}")


def test_log_derivative_plateau(hr4, hr4_run):
    profile, est = hr4_run
    _, (star, plus) = roots_and_samples(hr4, est.c_hat)
    fit = fit_tail(profile, [star, plus])
    try:
        report = verify_pushed_asymptotics(profile, fit, star, plus)
    except VerificationFailed as err:
        report = err.report
    ok = report.checks["derivative_rate"] and abs(report.derivative_rate - HR4_LAM_PLUS) / HR4_LAM_PLUS <= 0.02
    verdict(5, ok, f"mean -phi_s/phi {report.derivative_rate:.5f}, max rel deviation {report.derivative_error:.2e}")


def test_pulled_control(kpp, kpp_run):
    profile, est = kpp_run
    c0 = compute_c0(kpp, 64)
    sample = k_of_lambda(kpp, 64, c0.lambda_at_c0)
    fit = fit_tail(profile, [sample])
    try:
        verify_pushed_asymptotics(profile, fit, sample, sample)
        passed = ["all"]
    except VerificationFailed as err:
        passed = [name for name, ok in err.report.checks.items() if ok]
    _, lam = log_slope(profile, band=(1e-8, 1e-3))
    cls = classify(est.c_hat, c0.c0, fit, dispersion_roots(kpp, 64, est.c_hat))
    speed_err = abs(est.c_hat - 2.0) / 2.0
    ok = cls.verdict == "pulled" and speed_err <= 0.02 and not passed
    verdict(6, ok, f"verdict {cls.verdict}, c_hat {est.c_hat:.5f}, local rate {lam.min():.3f}..{lam.max():.3f}, pushed checks passed {passed}")


def test_periodic_medium(phr, phr_run):
    profile, est = phr_run
    c0 = compute_c0(phr, 64).c0
    margin = (est.c_hat - c0) / c0
    ok = est.c_hat >= c0 * 0.99
    detail = f"c_hat {est.c_hat:.5f}, c0 {c0:.5f}, margin {margin:.2%}"
    if margin > 0.005:
        rs, samples = roots_and_samples(phr, est.c_hat)
        fit = fit_tail(profile, samples)
        rate_err = abs(fit.lambda_hat - rs.larger) / rs.larger
        ok = ok and rate_err <= 0.05 and fit.modulation_cv < 0.05
        detail += f", lambda_hat {fit.lambda_hat:.5f} vs {rs.larger:.5f}, modulation cv {fit.modulation_cv:.2e}"
    verdict(7, ok, detail)


def test_ladder_certificates(hr4):
    spectra = spectral_data(hr4, 64, HR4_SPEED)
    holder = holder_constants(hr4)
    worst_eps, monotone, lines = 0.0, True, []
    for ladder in (build_upper_ladder(spectra, holder), build_lower_ladder(spectra, holder)):
        cert = check_ladder(ladder, hr4, h=1 / 512, strict=False)
        upper = ladder.kind == "upper"
        signs_ok = all((r.extreme_relative if upper else -r.extreme_relative) >= -r.eps_grid for r in cert.rungs)
        worst_eps = max(worst_eps, max(r.eps_grid for r in cert.rungs))
        monotone &= cert.monotone and signs_ok and [r.n for r in cert.rungs] == [1, 2, 3, 4, 5]
        lines.append(f"{ladder.kind} sigma0 {ladder.sigma0:g} margin {cert.monotonicity_margin:.2e}")
    verdict(8, monotone and worst_eps < 1e-4, f"max eps_grid {worst_eps:.2e}; " + "; ".join(lines))


def test_stability_with_shift(hr4, hr4_exp_runs):
    spectra = spectral_data(hr4, 64, HR4_SPEED)
    taus, ok, parts = [], True, []
    for h, (_, est) in sorted(hr4_exp_runs.items(), reverse=True):
        env = build_stability_envelope(hr4_exact(h), spectra, datum_rate=1.0)
        rep, shift = check_envelope(env, est.trajectory, tol=1e-8, strict=False)
        gap = min(rep.min_lower_gap, rep.min_upper_gap)
        dist = shift.residual_history[-1, 2]
        ok &= shift.converged and dist < 1e-3 and gap >= -1e-8
        taus.append(shift.tau_hat)
        parts.append(f"h=1/{round(1 / h)} tau {shift.tau_hat:.5f} dist {dist:.1e} gap {gap:.1e}")
    refine = abs(taus[0] - taus[1]) / abs(taus[1])
    verdict(9, ok and refine <= 0.02, "; ".join(parts) + f"; refinement change {refine:.2e}")


def test_uniqueness_up_to_translation(hr4_step_run, hr4_exp_runs):
    p_exp, est_exp = hr4_exp_runs[1 / 128]
    p_step, est_step = hr4_step_run
    sigma, dist = align_profiles(p_exp, p_step)
    ref = hr4_exact(1 / 128)
    tau_exp, _ = fit_shift(ref, est_exp.trajectory[-1], HR4_SPEED)
    tau_step, _ = fit_shift(ref, est_step.trajectory[-1], HR4_SPEED)
    predicted = HR4_SPEED * (tau_step - tau_exp)
    rel = abs(sigma - predicted) / abs(predicted)
    verdict(10, dist < 1e-3 and rel <= 0.02, f"sigma_hat {sigma:.5f}, c*(tau difference) {predicted:.5f}, aligned distance {dist:.1e}")


def test_kernel_residual(hr4, kpp, phr, hr4_run, kpp_run, phr_run):
    r = 0.5 * (HR4_LAM_STAR + HR4_LAM_PLUS)
    exact = kernel_residual(hr4_exact(1 / 2048, -30.0, 30.0), hr4, r).ratio
    relaxed = {"hadeler_rothe": kernel_residual(hr4_run[0], hr4, r).ratio, "kpp": kernel_residual(kpp_run[0], kpp, 0.5).ratio}
    rs = dispersion_roots(phr, 64, phr_run[1].c_hat)
    relaxed["periodic_hr"] = kernel_residual(phr_run[0], phr, 0.5 * sum(rs.roots)).ratio
    ok = exact < 1e-6 and all(v < 1e-3 for v in relaxed.values())
    verdict(11, ok, f"closed form {exact:.2e}, relaxed " + ", ".join(f"{k} {v:.2e}" for k, v in relaxed.items()))


def test_comparison_principle(hr4, phr):
    rng = np.random.default_rng(7)
    h, n = 1 / 32, 320
    worst_order = worst_range = 0.0
    for trial in range(50):
        medium = (hr4, phr)[trial % 2]
        u = np.clip(np.sort(rng.uniform(0, 1, n))[::-1] + rng.normal(0, 0.05, n), 0, 1)
        v = np.clip(u + rng.uniform(0, 0.4, n) * (rng.uniform(size=n) < 0.5), 0, 1)
        dt = default_dt(medium, h, "explicit")
        a, b = FrontState(0.0, 0.0, u, h), FrontState(0.0, 0.0, v, h)
        for k in range(1, 401):
            a, b = step(a, dt, medium, "explicit"), step(b, dt, medium, "explicit")
            if k % 20 == 0:  # stored times
                worst_order = max(worst_order, float(np.max(a.u - b.u)))
                worst_range = max(worst_range, -min(a.u.min(), b.u.min()), max(a.u.max(), b.u.max()) - 1)
    ok = worst_order <= 1e-9 and worst_range <= 1e-9
    verdict(12, ok, f"50 pairs, max (u - v) {worst_order:.1e}, max excursion outside [0,1] {max(worst_range, 0):.1e}")
