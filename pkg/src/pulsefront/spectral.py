"""Cell eigenproblems: k(lambda), mu0, mu1, the linear speed c0 and the root set F_c."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse.linalg import splu

from .errors import (
    BracketFailure,
    MonostabilityViolation,
    NonConvergence,
    NoPositiveEigenfunction,
    ProfileTooCoarse,
)
from .medium import PeriodicMedium

LAMBDA_MAX = 64.0
MAX_ITER = 200


@dataclass(frozen=True)
class DispersionSample:
    lam: float
    k: float
    phi: np.ndarray
    residual: float


@dataclass(frozen=True)
class StabilityExponents:
    mu0: float
    psi0: np.ndarray
    mu1: float
    psi1: np.ndarray


@dataclass(frozen=True)
class RootSet:
    c: float
    roots: tuple[float, ...]
    tangent: bool
    g_max: float
    lambda_peak: float

    @property
    def empty(self) -> bool:
        return not self.roots

    @property
    def smaller(self) -> float | None:
        return self.roots[0] if self.roots else None

    @property
    def larger(self) -> float | None:
        return self.roots[-1] if len(self.roots) == 2 else None


@dataclass(frozen=True)
class SpeedC0:
    c0: float
    lambda_at_c0: float
    concavity_certificate: dict


@dataclass(frozen=True)
class KernelResidual:
    ratio: float
    numerator: float
    denominator: float
    window: tuple[float, float]
    r: float


def cell_operator(medium: PeriodicMedium, n: int, lam: float, potential: np.ndarray) -> sp.csc_matrix:
    """Periodic central-difference matrix of
    -(a phi')' + (2 lam a + q) phi' + [lam a' - lam q - lam^2 a - V] phi."""
    h = medium.L / n
    x = medium.grid(n)
    a_half = medium.a(x + 0.5 * h)  # a_{i+1/2}
    a_left = np.roll(a_half, 1)  # a_{i-1/2}
    a = medium.a(x)
    drift = (2.0 * lam * a + medium.q) / (2.0 * h)
    diag = (a_half + a_left) / h**2 + lam * medium.a_prime(x) - lam * medium.q - lam**2 * a - potential
    upper = -a_half / h**2 + drift
    lower = -a_left / h**2 - drift
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
    vals = np.concatenate([diag, upper, lower])
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))


def cell_operator_slope(medium: PeriodicMedium, n: int, lam: float) -> sp.csc_matrix:
    """d/d(lambda) of cell_operator."""
    h = medium.L / n
    x = medium.grid(n)
    a = medium.a(x)
    diag = medium.a_prime(x) - medium.q - 2.0 * lam * a
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
    vals = np.concatenate([diag, a / h, -a / h])
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))


def principal_pair(A: sp.spmatrix, tol: float | None = None) -> tuple[float, np.ndarray, float]:
    """Smallest-real eigenpair by shifted inverse iteration; eigenvector positive with max 1."""
    n = A.shape[0]
    scale = float(abs(A).sum(axis=1).max())
    if tol is None:
        tol = max(1e-10, 64 * np.finfo(float).eps * scale)
    eye = sp.identity(n, format="csc")
    phi = np.ones(n)
    k = float(phi @ (A @ phi)) / n
    res = np.inf
    for _ in range(MAX_ITER):
        sigma = k - 1.0
        y = splu((A - sigma * eye).tocsc()).solve(phi)
        phi = y / y[np.argmax(np.abs(y))]
        Aphi = A @ phi
        k = float(phi @ Aphi) / float(phi @ phi)
        res = float(np.max(np.abs(Aphi - k * phi)))
        if res <= tol:
            break
    else:
        raise NonConvergence(f"inverse iteration stalled at residual {res:.3g} (tol {tol:.3g})")
    if phi.min() <= 0:
        raise NoPositiveEigenfunction(f"eigenvector changes sign (min {phi.min():.3g}); refine the cell grid")
    return k, phi, res


def k_of_lambda(medium: PeriodicMedium, n: int, lam: float) -> DispersionSample:
    if n < 32:
        raise ValueError("cell resolution n must be at least 32")
    if not np.isfinite(lam):
        raise ValueError("lambda must be finite")
    V = medium.fu(medium.grid(n), 0.0)
    k, phi, res = principal_pair(cell_operator(medium, n, lam, V))
    return DispersionSample(lam=float(lam), k=k, phi=phi, residual=res)


def k_slope(medium: PeriodicMedium, n: int, lam: float) -> tuple[float, float]:
    """k(lambda) and k'(lambda), the latter from the adjoint eigenvector."""
    V = medium.fu(medium.grid(n), 0.0)
    A = cell_operator(medium, n, lam, V)
    k, phi, _ = principal_pair(A)
    _, psi, _ = principal_pair(A.T.tocsc())
    dA = cell_operator_slope(medium, n, lam)
    return k, float(psi @ (dA @ phi)) / float(psi @ phi)


def stability_exponents(medium: PeriodicMedium, n: int) -> StabilityExponents:
    x = medium.grid(n)
    mu0, psi0, _ = principal_pair(cell_operator(medium, n, 0.0, medium.fu(x, 0.0)))
    mu1, psi1, _ = principal_pair(cell_operator(medium, n, 0.0, medium.fu(x, 1.0)))
    if mu0 >= 0 or mu1 <= 0:
        raise MonostabilityViolation(f"need mu0 < 0 < mu1, got mu0={mu0:.6g}, mu1={mu1:.6g}")
    return StabilityExponents(mu0=mu0, psi0=psi0, mu1=mu1, psi1=psi1)


def _dyadic_peak(func, j_lo: int = -10, j_hi: int = 6) -> tuple[float, float, float]:
    """Bracket (a, b, c) around the smallest value of func over 2**j."""
    lams = 2.0 ** np.arange(j_lo, j_hi + 1)
    vals = np.array([func(l) for l in lams])
    j = int(np.argmin(vals))
    if j == len(lams) - 1:
        raise BracketFailure(f"no interior minimizer below lambda={LAMBDA_MAX:g}")
    if j == 0:
        return 0.5 * lams[0], lams[0], lams[1]
    return lams[j - 1], lams[j], lams[j + 1]


def compute_c0(medium: PeriodicMedium, n: int, tol: float = 1e-10) -> SpeedC0:
    def speed(lam):
        return -k_of_lambda(medium, n, lam).k / lam

    mu0 = k_of_lambda(medium, n, 0.0).k
    if mu0 >= 0:
        raise MonostabilityViolation(f"mu0 = {mu0:.6g} >= 0")
    bracket = _dyadic_peak(speed)
    res = minimize_scalar(speed, bracket=bracket, method="golden", tol=tol)
    lam_c0, c0 = float(res.x), float(res.fun)

    lams = np.linspace(0.0, 4.0 * lam_c0, 33)
    ks = np.array([k_of_lambda(medium, n, l).k for l in lams])
    second = ks[2:] - 2 * ks[1:-1] + ks[:-2]
    cert = {
        "lambdas": lams.tolist(),
        "k": ks.tolist(),
        "second_differences": second.tolist(),
        "max_second_difference": float(second.max()),
        "min_speed_sampled": float(np.min(-ks[1:] / lams[1:])),
    }
    return SpeedC0(c0=c0, lambda_at_c0=lam_c0, concavity_certificate=cert)


def dispersion_roots(medium: PeriodicMedium, n: int, c: float, tol: float = 1e-10) -> RootSet:
    """Solutions of k(lambda) + c lambda = 0 on (0, LAMBDA_MAX]."""
    if not c > 0:
        raise ValueError("speed c must be positive")

    def g(lam):
        return k_of_lambda(medium, n, lam).k + c * lam

    bracket = _dyadic_peak(lambda l: -g(l))
    res = minimize_scalar(lambda l: -g(l), bracket=bracket, method="golden")
    peak = float(res.x)
    # golden section only pins a flat peak to ~sqrt(eps); polish on g' = k' + c
    slope = lambda l: k_slope(medium, n, l)[1] + c
    lo, hi = bracket[0], bracket[2]
    if slope(lo) > 0 > slope(hi):
        peak = brentq(slope, lo, hi, xtol=1e-14)
    g_max = g(peak)
    threshold = max(10 * tol, 1e-6 * max(1.0, abs(c * peak)))
    if g_max < -threshold:
        return RootSet(c=c, roots=(), tangent=False, g_max=g_max, lambda_peak=peak)
    if g_max <= threshold:
        return RootSet(c=c, roots=(peak,), tangent=True, g_max=g_max, lambda_peak=peak)
    roots = [brentq(g, 0.0, peak, xtol=1e-14)]
    if g(LAMBDA_MAX) < 0:
        roots.append(brentq(g, peak, LAMBDA_MAX, xtol=1e-14))
    return RootSet(c=c, roots=tuple(float(r) for r in roots), tangent=False, g_max=g_max, lambda_peak=peak)


def _diagonal_neighbors(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Table values one lab-frame grid step to the right and left: (k+1, i+1) and (k-1, i-1)."""
    right = np.roll(v[2:], -1, axis=1)
    left = np.roll(v[:-2], 1, axis=1)
    return right, left


def traveling_operator(table: np.ndarray, medium: PeriodicMedium, c: float, h: float, potential: np.ndarray) -> np.ndarray:
    """Apply -(a v_x)_x + q v_x - c v_s - V v on the (s, xi) table; returns interior rows."""
    m = table.shape[1]
    xi = np.arange(m) * (medium.L / m)
    a_right = medium.a(xi + 0.5 * h)
    a_left = medium.a(xi - 0.5 * h)
    v = table[1:-1]
    right, left = _diagonal_neighbors(table)
    diffusion = (a_right * (right - v) - a_left * (v - left)) / h**2
    v_x = (right - left) / (2 * h)
    v_s = (table[2:] - table[:-2]) / (2 * h)
    return -diffusion + medium.q * v_x - c * v_s - potential[1:-1] * v


def kernel_residual(front, medium: PeriodicMedium, r: float, phi_floor: float = 1e-12) -> KernelResidual:
    """Weighted relative residual of the traveling linearization applied to phi_s."""
    h = front.h
    phi, phi_s = front.phi, front.phi_s
    mean = phi.mean(axis=1)
    s = front.s_grid - front.s_half
    # decay rate measured in the linear tail, away from the clamped window edge
    log_mean = np.log(np.clip(mean, 1e-300, None))
    decay = -np.diff(log_mean) / h
    band = (mean[1:] > 1e-10) & (mean[:-1] < 1e-2) & (s[1:] > 0)
    rate = float(np.median(decay[band])) if band.any() else 0.0
    if rate > 0 and 1.0 / (rate * h) < 8:
        raise ProfileTooCoarse(f"{1.0 / (rate * h):.1f} points per decay length, need 8")

    m = phi.shape[1]
    xi = np.arange(m) * (medium.L / m)
    V = medium.fu(xi[None, :], phi)
    Lv = traveling_operator(phi_s, medium, front.c, h, V)
    keep = mean[1:-1] > phi_floor
    keep[:2] = False
    keep[-2:] = False
    w = 1.0 + np.exp(2 * r * s[1:-1])
    num = float(np.sqrt(np.sum(w[keep, None] * Lv[keep] ** 2)))
    den = float(np.sqrt(np.sum(w[keep, None] * phi_s[1:-1][keep] ** 2)))
    s_kept = s[1:-1][keep]
    return KernelResidual(
        ratio=num / den,
        numerator=num,
        denominator=den,
        window=(float(s_kept.min()), float(s_kept.max())),
        r=float(r),
    )
