"""Moving-window simulation of u_t = (a u_x)_x - q u_x + f(x, u) and front extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack
from scipy.stats import linregress

from .errors import (
    BlowUp,
    CFLViolation,
    MultipleCrossings,
    NoConvergence,
    NoCrossing,
    PeriodicityDefect,
    SpeedDrift,
)
from .medium import PeriodicMedium

CFL = 0.4
BLOWUP_LEVEL = 1.5
CROSSING_BAND = 1e-6


@dataclass
class FrontState:
    t: float
    x_offset: float
    u: np.ndarray
    h: float

    @property
    def W(self) -> float:
        return self.u.size * self.h

    @property
    def x(self) -> np.ndarray:
        return self.x_offset + self.h * np.arange(self.u.size)

    def copy(self) -> "FrontState":
        return FrontState(self.t, self.x_offset, self.u.copy(), self.h)


@dataclass(frozen=True)
class InitialDatum:
    """Front-like initial data: 1 on the left, vanishing or decaying on the right.

    kind is ``heaviside`` (1 for x < x0), ``exponential`` (min(1, exp(-rate (x - x0))))
    or ``callable`` (func(x) evaluated on the grid).
    """

    kind: str = "heaviside"
    x0: float = 0.0
    rate: float = 1.0
    func: Callable | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "heaviside":
            return np.where(x < self.x0, 1.0, 0.0)
        if self.kind == "exponential":
            return np.minimum(1.0, np.exp(-self.rate * (x - self.x0)))
        if self.kind == "callable":
            return np.asarray(self.func(x), dtype=float)
        raise ValueError(f"unknown datum kind {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    h: float = 1 / 64
    width: float = 60.0
    T: float = 80.0
    dt: float | None = None
    scheme: str = "imex"
    level: float = 0.5
    transient: float = 0.3
    start_mark: float = 0.35
    recenter_mark: float = 0.6
    speed_tol: float = 1e-6
    drift_tol: float = 1e-4
    periodicity_tol: float = 1e-4
    periods: int = 2
    max_extra_periods: int = 8
    settle: float = 2.0


@dataclass
class SpeedEstimate:
    c_hat: float
    stderr: float
    samples: np.ndarray
    window: tuple[float, float]
    drift: float = 0.0
    poincare: np.ndarray | None = None
    extrema: tuple[float, float] = (0.0, 1.0)
    trajectory: list = field(default_factory=list)


@dataclass
class FrontProfile:
    s_grid: np.ndarray
    phi: np.ndarray
    phi_s: np.ndarray
    c: float
    L: float
    periodicity_defect: float = 0.0

    @property
    def h(self) -> float:
        return float(self.s_grid[1] - self.s_grid[0])

    @property
    def m(self) -> int:
        return self.phi.shape[1]

    @property
    def xi(self) -> np.ndarray:
        return np.arange(self.m) * (self.L / self.m)

    @property
    def mean(self) -> np.ndarray:
        return self.phi.mean(axis=1)

    @property
    def s_half(self) -> float:
        """Frame coordinate where the cell average crosses 1/2."""
        mean = self.mean
        i = int(np.argmax(mean < 0.5))
        if i == 0:
            return float(self.s_grid[0])
        s0, s1, m0, m1 = self.s_grid[i - 1], self.s_grid[i], mean[i - 1], mean[i]
        return float(s0 + (m0 - 0.5) / (m0 - m1) * (s1 - s0))

    def column_index(self, x) -> np.ndarray:
        return np.rint(np.mod(np.asarray(x, float), self.L) / (self.L / self.m)).astype(int) % self.m

    def __call__(self, s, x) -> np.ndarray:
        """phi(s, x mod L) with linear interpolation in s; constant extension past the table ends."""
        s, col = np.broadcast_arrays(np.asarray(s, dtype=float), self.column_index(x))
        pos = np.clip((s - self.s_grid[0]) / self.h, 0.0, self.s_grid.size - 1.0)
        k = np.minimum(pos.astype(int), self.s_grid.size - 2)
        w = pos - k
        return (1 - w) * self.phi[k, col] + w * self.phi[k + 1, col]

    def shifted(self, ds: float) -> "FrontProfile":
        return replace(self, s_grid=self.s_grid + ds)


def s_derivative(phi: np.ndarray, h: float) -> np.ndarray:
    d = np.empty_like(phi)
    d[1:-1] = (phi[2:] - phi[:-2]) / (2 * h)
    d[0] = (phi[1] - phi[0]) / h
    d[-1] = (phi[-1] - phi[-2]) / h
    return d


class Integrator:
    """One-step map for a fixed window geometry.

    The window only ever moves by whole periods, so the coefficient arrays and
    the Crank-Nicolson factorisation are built once.
    """

    def __init__(self, medium: PeriodicMedium, h: float, n_points: int, dt: float, scheme: str = "imex", x_offset: float = 0.0):
        if scheme not in ("imex", "explicit"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.medium, self.h, self.n, self.dt, self.scheme = medium, h, n_points, dt, scheme
        x = x_offset + h * np.arange(n_points)
        a_right = medium.a(x + 0.5 * h)
        a_left = medium.a(x - 0.5 * h)
        if scheme == "explicit":
            limit = CFL * h**2 / float(max(a_right.max(), a_left.max()))
            if dt > limit * (1 + 1e-12):
                raise CFLViolation(f"dt={dt:.3g} exceeds the explicit bound {limit:.3g}")
        self.lower = a_left / h**2 + medium.q / (2 * h)
        self.upper = a_right / h**2 - medium.q / (2 * h)
        self.diag = -(a_left + a_right) / h**2
        self.left_ghost = float(self.lower[0])  # u = 1 behind the window
        self.reaction = medium.bind(x)
        if scheme == "imex":
            half = 0.5 * dt
            dl, d, du, du2, ipiv, info = lapack.dgttrf(-half * self.lower[1:], 1.0 - half * self.diag, -half * self.upper[:-1])
            if info != 0:
                raise BlowUp(f"tridiagonal factorisation failed (info={info})")
            self._lu = (dl, d, du, du2, ipiv)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Discrete (a u_x)_x - q u_x with the boundary clamps."""
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        out[0] += self.left_ghost
        return out

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv = self._lu
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        return x

    def _react(self, u: np.ndarray, tau: float) -> np.ndarray:
        f = self.reaction.f
        u1 = u + tau * f(u)
        return 0.5 * (u + u1 + tau * f(u1))

    def advance(self, u: np.ndarray, startup: bool = False) -> np.ndarray:
        dt = self.dt
        if self.scheme == "explicit":
            f = self.reaction.f
            u1 = u + dt * (self.apply(u) + f(u))
            return 0.5 * (u + u1 + dt * (self.apply(u1) + f(u1)))
        half = 0.5 * dt
        v = self._react(u, half)
        if startup:
            # two backward-Euler half steps share the Crank-Nicolson matrix and damp kinks
            v = self._solve(v + half * self.left_ghost * _e0(v.size))
            v = self._solve(v + half * self.left_ghost * _e0(v.size))
        else:
            rhs = v + half * self.apply(v)
            rhs[0] += half * self.left_ghost
            v = self._solve(rhs)
        return self._react(v, half)


def _e0(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[0] = 1.0
    return e


_INTEGRATORS: dict = {}


def step(state: FrontState, dt: float, medium: PeriodicMedium, scheme: str = "explicit") -> FrontState:
    """Advance one step.  Factorisations are cached per (medium, geometry, dt, scheme)."""
    key = (id(medium), state.h, state.u.size, dt, scheme, state.x_offset % medium.L)
    integ = _INTEGRATORS.get(key)
    if integ is None or integ.medium is not medium:
        if len(_INTEGRATORS) > 32:
            _INTEGRATORS.clear()
        integ = _INTEGRATORS[key] = Integrator(medium, state.h, state.u.size, dt, scheme, state.x_offset)
    u = integ.advance(state.u)
    if u.max() > BLOWUP_LEVEL or not np.all(np.isfinite(u)):
        raise BlowUp(f"max u = {np.nanmax(u):.3g} at t = {state.t + dt:.4g}")
    return FrontState(state.t + dt, state.x_offset, u, state.h)


def front_position(state: FrontState, level: float = 0.5) -> float:
    d = state.u - level
    idx = np.flatnonzero(np.abs(d) > CROSSING_BAND)
    if idx.size == 0:
        raise NoCrossing(f"u stays within {CROSSING_BAND:g} of level {level}")
    sign = d[idx] > 0
    changes = np.flatnonzero(sign[1:] != sign[:-1])
    if changes.size == 0:
        raise NoCrossing(f"u never crosses level {level}")
    if changes.size > 1:
        raise MultipleCrossings(f"{changes.size} crossings of level {level}")
    i, j = idx[changes[0]], idx[changes[0] + 1]
    # linear interpolation between the bracketing grid points
    x = state.x_offset + state.h * np.array([i, j], dtype=float)
    if j == i + 1:
        return float(x[0] + d[i] / (d[i] - d[j]) * (x[1] - x[0]))
    return float(0.5 * (x[0] + x[1]))


def default_dt(medium: PeriodicMedium, h: float, scheme: str) -> float:
    if scheme == "explicit":
        return CFL * h**2 / medium.c2
    return min(0.01, 2.0 * h)


def _cells(medium: PeriodicMedium, h: float) -> int:
    m = medium.L / h
    if abs(m - round(m)) > 1e-9:
        raise ValueError("grid spacing must divide the period")
    return int(round(m))


class _Run:
    """Mutable single-writer simulation: state, integrator, position log."""

    def __init__(self, medium: PeriodicMedium, datum: InitialDatum, config: SimConfig):
        self.medium, self.config = medium, config
        h = config.h
        self.m = _cells(medium, h)
        L = medium.L
        n_cells = max(2, math.ceil(config.width / L))
        self.n = n_cells * self.m
        x_offset = L * math.floor((datum.x0 - config.start_mark * n_cells * L) / L)
        x = x_offset + h * np.arange(self.n)
        self.state = FrontState(0.0, x_offset, np.asarray(datum(x), dtype=float), h)
        self.scheme = config.scheme
        self.dt = config.dt if config.dt is not None else default_dt(medium, h, config.scheme)
        self.integ = Integrator(medium, h, self.n, self.dt, self.scheme, x_offset)
        self.steps = 0
        self.times: list[float] = [0.0]
        self.positions: list[float] = [front_position(self.state, config.level)]
        self.lo, self.hi = float(self.state.u.min()), float(self.state.u.max())

    def set_dt(self, dt: float) -> None:
        if dt != self.dt:
            self.dt = dt
            self.integ = Integrator(self.medium, self.state.h, self.n, dt, self.scheme, self.state.x_offset)

    def advance(self) -> None:
        st = self.state
        u = self.integ.advance(st.u, startup=self.steps < 2 and self.scheme == "imex")
        hi = u.max()
        if hi > BLOWUP_LEVEL or not np.isfinite(hi):
            raise BlowUp(f"max u = {hi:.3g} at t = {st.t + self.dt:.4g}")
        self.lo, self.hi = min(self.lo, float(u.min())), max(self.hi, float(hi))
        self.steps += 1
        st.u = u
        st.t = self.steps_time()
        pos = front_position(st, self.config.level)
        mark = st.x_offset + self.config.recenter_mark * st.W
        while pos > mark:
            # shift the window right by one period; the coefficients repeat
            st.u = np.concatenate([st.u[self.m:], np.zeros(self.m)])
            st.x_offset += self.medium.L
            mark += self.medium.L
        self.times.append(st.t)
        self.positions.append(pos)

    def steps_time(self) -> float:
        return self._t_base + (self.steps - self._step_base) * self.dt

    _t_base = 0.0
    _step_base = 0

    def rebase_clock(self) -> None:
        self._t_base = self.state.t
        self._step_base = self.steps


def fit_speed(times: np.ndarray, positions: np.ndarray, L: float, t_lo: float, t_hi: float, tol: float = 1e-6, max_iter: int = 50):
    """Self-consistent least-squares speed from positions at t_n = t_lo + n L / c."""
    sel = (times >= t_lo) & (times <= t_hi)
    c = linregress(times[sel], positions[sel]).slope
    fit = None
    for _ in range(max_iter):
        n_max = int(np.floor((t_hi - t_lo) * c / L))
        if n_max < 2:
            break
        tn = t_lo + np.arange(n_max + 1) * L / c
        xn = np.interp(tn, times, positions)
        fit = linregress(tn, xn)
        done = abs(fit.slope - c) < tol * abs(c)
        c = fit.slope
        if done:
            break
    if fit is None:
        fit = linregress(times[sel], positions[sel])
        tn, xn = times[sel], positions[sel]
    return float(c), float(fit.stderr), np.column_stack([tn, xn])


def _measured_speed(snapshots: Sequence[FrontState], m: int, level: float) -> float | None:
    """Mean speed from front positions exactly one period of snapshots apart."""
    if len(snapshots) <= m:
        return None
    pos = np.array([front_position(s, level) for s in snapshots])
    t = np.array([s.t for s in snapshots])
    return float(np.mean((pos[m:] - pos[:-m]) / (t[m:] - t[:-m])))


def extract_profile(
    snapshots: Sequence[FrontState],
    c: float,
    L: float,
    tol: float = 1e-4,
    correct_drift: bool = True,
    level: float = 0.5,
) -> FrontProfile:
    """Assemble phi(s, x mod L) from states at times t_0 + j h / c, j = 0, 1, ...

    Every (s, column) entry receives one value per period of snapshots; the
    entries are averaged and the largest disagreement between consecutive
    periods is the periodicity defect.  A column is stitched from snapshots up
    to one period apart, so a small error in c leaves a seam; with
    ``correct_drift`` the speed is re-measured from the snapshots themselves and
    each entry is moved to its frame coordinate by a first-order Taylor step.
    """
    h = snapshots[0].h
    m = int(round(L / h))
    t_ref = snapshots[0].t
    n = snapshots[0].u.size
    shifts, starts = [], []
    for snap in snapshots:
        j = int(round((snap.t - t_ref) * c / h))
        if abs((snap.t - t_ref) * c / h - j) > 1e-6:
            raise ValueError("snapshots must be spaced by multiples of h / c")
        shifts.append(j)
        starts.append(int(round(snap.x_offset / h)) - j)
    k_lo = max(starts)
    k_hi = min(starts) + n - 1
    if k_hi - k_lo < 4:
        raise ValueError("snapshots do not overlap")
    rows = k_hi - k_lo + 1
    n_periods = max(1, len(snapshots) // m)
    k = np.arange(k_lo, k_hi + 1)
    r = np.arange(rows)

    def assemble(phi_s=None, drift=0.0):
        per_period = np.zeros((n_periods, rows, m))
        counts = np.zeros((n_periods, rows, m))
        for idx, (snap, j, start) in enumerate(zip(snapshots, shifts, starts)):
            p = min(idx // m, n_periods - 1)
            col = np.mod(k + j, m)
            vals = snap.u[k - start]
            if phi_s is not None:
                # the entry sits at s - delta in the true frame; step it back to s
                vals = vals + phi_s[r, col] * (drift * (snap.t - t_ref))
            np.add.at(per_period[p], (r, col), vals)
            np.add.at(counts[p], (r, col), 1.0)
        if np.any(counts == 0):
            raise ValueError("snapshot set does not cover every cell position; supply at least one period")
        return per_period / counts

    per_period = assemble()
    c_true = _measured_speed(snapshots, m, level) if correct_drift else None
    if c_true is not None:
        phi_s = s_derivative(per_period.mean(axis=0), h)
        per_period = assemble(phi_s, c_true - c)
    defect = float(np.max(np.abs(np.diff(per_period, axis=0)))) if n_periods > 1 else 0.0
    if defect > tol:
        raise PeriodicityDefect(f"aligned snapshots differ by {defect:.3g} > {tol:g}")
    phi = per_period.mean(axis=0)
    s_grid = k * h - c * t_ref
    return FrontProfile(s_grid=s_grid, phi=phi, phi_s=s_derivative(phi, h), c=float(c), L=float(L), periodicity_defect=defect)


def relax_to_front(
    medium: PeriodicMedium,
    datum: InitialDatum,
    config: SimConfig,
    record_times: Sequence[float] = (),
) -> tuple[FrontProfile, SpeedEstimate]:
    """Run to time T, fit the speed on Poincare samples, then collect aligned snapshots."""
    run = _Run(medium, datum, config)
    L, h = medium.L, config.h
    targets = sorted(record_times)
    trajectory = []

    def advance_to(t_stop):
        while run.state.t < t_stop - 1e-9 * run.dt:
            run.advance()
            while targets and run.state.t >= targets[0] - 1e-9:
                targets.pop(0)
                trajectory.append(run.state.copy())

    while targets and targets[0] <= 0:
        targets.pop(0)
        trajectory.append(run.state.copy())
    t_cut = config.transient * config.T
    advance_to(t_cut)
    # From here on the step divides h / c, so the fitted run and the snapshot
    # phase see the same discrete travelling wave.
    times, positions = np.array(run.times), np.array(run.positions)
    c_guess = linregress(times[times >= 0.5 * t_cut], positions[times >= 0.5 * t_cut]).slope
    if c_guess > 0:
        per_shift = max(1, math.ceil(h / (c_guess * run.dt) - 1e-9))
        run.set_dt(h / (c_guess * per_shift))
        run.rebase_clock()
    advance_to(config.T)

    times, positions = np.array(run.times), np.array(run.positions)
    t_end = run.state.t
    c_hat, stderr, poincare = fit_speed(times, positions, L, t_cut, t_end, config.speed_tol)
    t_mid = 0.5 * (t_cut + t_end)
    c_first = fit_speed(times, positions, L, t_cut, t_mid, config.speed_tol)[0]
    c_second = fit_speed(times, positions, L, t_mid, t_end, config.speed_tol)[0]
    drift = abs(c_second - c_first) / abs(c_hat)
    if drift > config.drift_tol:
        raise SpeedDrift(f"speed moved by {drift:.2e} (relative) between fit windows ({c_first:.6f} -> {c_second:.6f})")

    # Phase 2: snapshots every h / c_hat tile the frame grid.
    per_shift = max(1, round(h / (c_hat * run.dt)))
    run.set_dt(h / (c_hat * per_shift))
    run.rebase_clock()
    for _ in range(int(round(config.settle / run.dt))):
        run.advance()
    cell = h if medium.homogeneous else L
    m = int(round(cell / h))
    snapshots: list[FrontState] = []
    profile = None
    defect = np.inf
    for extra in range(config.periods + config.max_extra_periods):
        for _ in range(m):
            snapshots.append(run.state.copy())
            for _ in range(per_shift):
                run.advance()
        if extra + 1 < config.periods:
            continue
        window = snapshots[-config.periods * m:]
        try:
            profile = extract_profile(window, c_hat, cell, config.periodicity_tol, level=config.level)
            break
        except PeriodicityDefect as err:
            defect = err
    if profile is None:
        raise NoConvergence(f"Poincare snapshots did not settle: {defect}")

    est = SpeedEstimate(
        c_hat=c_hat,
        stderr=stderr,
        samples=np.column_stack([times, positions]),
        window=(t_cut, t_end),
        drift=drift,
        poincare=poincare,
        extrema=(run.lo, run.hi),
        trajectory=trajectory,
    )
    return profile, est
