"""Reference constructions that share no code with the package.

The Fourier collocation eigensolver converges spectrally for the smooth media
used here; the values frozen in the tests were produced with it (N = 48,
agreeing with N = 64 to 1e-11).
"""
import numpy as np

from pulsefront.frontsim import FrontProfile

SQRT2 = np.sqrt(2.0)
HR4_SPEED = 3.0 / SQRT2
HR4_LAM_STAR = 1.0 / SQRT2
HR4_LAM_PLUS = SQRT2

# a(x) = 1 + 0.5 cos(2 pi x), q = 0, f = u(1 - u), L = 1
K_VARIABLE_DIFFUSIVITY_LAM1 = -1.8689541884109413
C0_VARIABLE_DIFFUSIVITY = 1.864768631889512
# -u'' - (5 + 2 cos 2 pi x) u, the linearization at 1 of periodic_hadeler_rothe(4, 2)
MU1_PERIODIC_HR = 4.949396158004313


def fourier_diff(n: int, L: float = 1.0) -> np.ndarray:
    j = np.arange(n)
    col = np.zeros(n)
    col[1:] = 0.5 * (-1.0) ** j[1:] / np.tan(j[1:] * np.pi / n)
    idx = (j[:, None] - j[None, :]) % n
    return col[idx] * (2 * np.pi / L)


def fourier_principal_eigenvalue(a, a_prime, V, q: float, lam: float, n: int = 48) -> float:
    """Eigenvalue with a positive eigenvector of
    -(a phi')' + (2 lam a + q) phi' + (lam a' - lam q - lam^2 a - V) phi on the unit circle."""
    x = np.arange(n) / n
    D = fourier_diff(n)
    A = -D @ np.diag(a(x)) @ D + np.diag(2 * lam * a(x) + q) @ D
    A += np.diag(lam * a_prime(x) - lam * q - lam**2 * a(x) - V(x))
    w, v = np.linalg.eig(A)
    found = []
    for i in range(n):
        vec = v[:, i] / v[np.argmax(np.abs(v[:, i])), i]
        if abs(w[i].imag) < 1e-9 and np.max(np.abs(vec.imag)) < 1e-9 and np.all(vec.real > 0):
            found.append(w[i].real)
    return min(found)


def hr4_phi(s):
    return 1.0 / (1.0 + np.exp(SQRT2 * np.asarray(s, dtype=float)))


def hr4_phi_s(s):
    e = np.exp(-SQRT2 * np.abs(np.asarray(s, dtype=float)))
    return -SQRT2 * e / (1.0 + e) ** 2


def hr4_exact(h: float, lo: float = -30.0, hi: float = 60.0) -> FrontProfile:
    """Closed-form Hadeler-Rothe(4) front on a one-column table."""
    s = np.arange(lo, hi + 0.5 * h, h)
    phi = hr4_phi(s)[:, None]
    return FrontProfile(s_grid=s, phi=phi, phi_s=hr4_phi_s(s)[:, None], c=HR4_SPEED, L=h)
