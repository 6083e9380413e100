"""Tail-rate extraction, the pushed-front asymptotic checks and the pushed/pulled verdict."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoPlateau, TailUnderflow, VerificationFailed
from .medium import periodic_resample
from .spectral import DispersionSample, RootSet

BAND = (1e-8, 1e-3)
UNDERFLOW = 1e-14
NO_PLATEAU_CV = 0.25
PULLED_SLACK = 0.02  # measured pulled speeds sit below c0 (log correction plus window cutoff)


@dataclass(frozen=True)
class DecayFit:
    lambda_hat: float
    B_hat: float
    fit_window: tuple[float, float]
    modulation_cv: float
    eig_used: float
    candidate_cv: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Classification:
    verdict: str
    c_star: float
    c0: float
    margin: float
    decay_matches: str
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class AsymptoticsReport:
    ratio_spread: float
    derivative_rate: float
    derivative_error: float
    exclusion_factor: float
    tol: float
    checks: dict


def _band_rows(profile, band=BAND) -> np.ndarray:
    mean = profile.mean
    # the band is taken on the decaying side of the front only
    tail = profile.s_grid >= profile.s_half
    return np.flatnonzero(tail & (mean >= band[0]) & (mean <= band[1]))


def log_slope(profile, band=(1e-12, 1e-2)) -> tuple[np.ndarray, np.ndarray]:
    """lambda(s) = -d log(mean phi)/ds at midpoints of consecutive samples inside the band."""
    mean = profile.mean
    tail = profile.s_grid >= profile.s_half
    in_band = tail & (mean >= band[0]) & (mean <= band[1])
    resolved = tail & (mean <= band[1])
    if resolved.any() and np.mean(mean[resolved] < UNDERFLOW) > 0.5:
        raise TailUnderflow("most of the tail window lies below 1e-14")
    rows = np.flatnonzero(in_band[:-1] & in_band[1:])
    if rows.size < 2:
        raise TailUnderflow("no resolved samples in the tail band")
    s = profile.s_grid
    lam = -(np.log(mean[rows + 1]) - np.log(mean[rows])) / (s[rows + 1] - s[rows])
    return 0.5 * (s[rows] + s[rows + 1]), lam


def _eigen_on_columns(sample: DispersionSample, m: int) -> np.ndarray:
    phi = periodic_resample(sample.phi, m) if m > 1 else np.array([1.0])
    return phi / phi.max()


def _cv(values: np.ndarray) -> float:
    return float(np.std(values) / np.mean(values))


def fit_tail(profile, candidates: list[DispersionSample], band=BAND) -> DecayFit:
    """Divide each candidate eigenfunction out of the tail and keep the flattest."""
    rows = _band_rows(profile, band)
    if rows.size < 8:
        raise NoPlateau("fewer than 8 profile rows inside the fit band")
    s = profile.s_grid[rows]
    table = profile.phi[rows]
    best = None
    scores = {}
    for cand in candidates:
        eig = _eigen_on_columns(cand, profile.m)
        w = table / eig[None, :]
        # fixed-rate flatness decides between candidates
        fixed = w * np.exp(cand.lam * s)[:, None]
        scores[cand.lam] = _cv(fixed)
        if best is None or scores[cand.lam] < scores[best[0].lam]:
            best = (cand, eig, w)
    cand, eig, w = best
    S = np.repeat(s, profile.m)
    slope, intercept = np.polyfit(S, np.log(w).ravel(), 1)
    lam_hat = -float(slope)
    B_hat = float(np.exp(intercept))
    ratio = w * np.exp(lam_hat * s)[:, None] / B_hat
    fit = DecayFit(
        lambda_hat=lam_hat,
        B_hat=B_hat,
        fit_window=(float(s[0]), float(s[-1])),
        modulation_cv=_cv(ratio),
        eig_used=float(cand.lam),
        candidate_cv=scores,
    )
    if scores[cand.lam] > NO_PLATEAU_CV:
        raise NoPlateau(f"best candidate flatness {scores[cand.lam]:.3g} exceeds {NO_PLATEAU_CV}")
    return fit


def _match(lam_hat: float, rootset: RootSet) -> str:
    """Which root of F_c the fitted rate reproduces."""
    roots = rootset.roots
    if len(roots) == 2:
        small, large = roots
        if abs(lam_hat - large) <= 0.05 * large and abs(lam_hat - small) >= 0.25 * small:
            return "larger"
        if abs(lam_hat - small) <= 0.05 * small:
            return "smaller"
        return "none"
    if len(roots) == 1 and abs(lam_hat - roots[0]) <= 0.05 * roots[0]:
        return "single"
    return "none"


def classify(c_star: float, c0: float, fit: DecayFit | None, rootset: RootSet, threshold: float = 0.005) -> Classification:
    margin = (c_star - c0) / c0
    matches = _match(fit.lambda_hat, rootset) if fit is not None else "none"
    notes = []
    if margin > threshold:
        if matches == "larger":
            verdict = "pushed"
        else:
            verdict = "ambiguous"
            if len(rootset.roots) < 2:
                notes.append("F_c has fewer than two roots at the measured speed; the steep rate is undefined")
            else:
                notes.append(f"speed exceeds c0 but the tail matches the {matches} root; refine the run")
    elif -PULLED_SLACK <= margin <= threshold:
        verdict = "pulled"
        if margin < -threshold:
            notes.append("speed below c0 within the pulled slack (slow logarithmic approach)")
    else:
        verdict = "ambiguous"
        notes.append("measured speed is well below c0; the run is not converged")
    return Classification(verdict=verdict, c_star=float(c_star), c0=float(c0), margin=float(margin), decay_matches=matches, notes=tuple(notes))


def verify_pushed_asymptotics(
    profile,
    fit: DecayFit,
    lam_star: DispersionSample,
    lam_plus: DispersionSample,
    tol: float = 0.02,
    band=BAND,
) -> AsymptoticsReport:
    """Ratio flatness, derivative rate and exclusion of the slow mode on the fit window."""
    rows = _band_rows(profile, band)
    s = profile.s_grid[rows]
    eig = _eigen_on_columns(lam_plus, profile.m)
    ratio = profile.phi[rows] / (fit.B_hat * np.exp(-fit.lambda_hat * s)[:, None] * eig[None, :])
    spread = float(ratio.max() / ratio.min()) - 1.0

    rate = -profile.phi_s[rows] / profile.phi[rows]
    rate_err = float(np.max(np.abs(rate - lam_plus.lam)) / lam_plus.lam)

    def fixed_cv(sample):
        e = _eigen_on_columns(sample, profile.m)
        return _cv(profile.phi[rows] / e[None, :] * np.exp(sample.lam * s)[:, None])

    cv_plus, cv_star = fixed_cv(lam_plus), fixed_cv(lam_star)
    factor = cv_star / cv_plus if cv_plus > 0 else np.inf
    checks = {
        "ratio_flatness": spread <= tol,
        "derivative_rate": rate_err <= tol,
        "exclusion": factor >= 5.0,
    }
    report = AsymptoticsReport(
        ratio_spread=spread,
        derivative_rate=float(np.mean(rate)),
        derivative_error=rate_err,
        exclusion_factor=float(factor),
        tol=tol,
        checks=checks,
    )
    for name, ok in checks.items():
        if not ok:
            raise VerificationFailed(f"pushed asymptotics check {name!r} failed", check=name, report=report)
    return report
