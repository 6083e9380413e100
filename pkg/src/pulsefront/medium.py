"""Periodic media: diffusivity a(x), constant drift q and reaction f(x, u)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, EllipticityViolation, NotMonostable, ZeroMismatch

FAMILIES = ("kpp_logistic", "hadeler_rothe", "periodic_hadeler_rothe", "custom")

# parameter names accepted per family, with defaults
_FAMILY_PARAMS = {
    "kpp_logistic": {},
    "hadeler_rothe": {"a_hr": None},
    "periodic_hadeler_rothe": {"a0": None, "a1": None},
    "custom": {},
}
_COMMON_PARAMS = {"q": 0.0, "a_mean": 1.0, "a_amp": 0.0}

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class MediumSpec:
    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    L: float = 1.0
    resolution: int = 64
    interp: str = "trig"
    # only used by the custom family
    diffusivity: Callable | None = None
    reaction: Callable | None = None
    reaction_du: Callable | None = None


class LocalReaction:
    """Reaction frozen at a fixed array of positions, so steppers only pass u."""

    def __init__(self, medium: "PeriodicMedium", x: np.ndarray):
        self._medium = medium
        self.x = np.asarray(x, dtype=float)
        self._b = medium._hr_coefficient(self.x)

    def f(self, u):
        if self._b is None:
            return self._medium.f(self.x, u)
        b = self._b
        return u * (1.0 + u * ((b - 1.0) - b * u))

    def fu(self, u):
        if self._b is None:
            return self._medium.fu(self.x, u)
        b = self._b
        return 1.0 + u * (2.0 * (b - 1.0) - 3.0 * b * u)


@dataclass(frozen=True, eq=False)
class PeriodicMedium:
    L: float
    a_samples: np.ndarray
    q: float
    family: str
    params: Mapping[str, float]
    interp: str
    c1: float
    c2: float
    _reaction: Callable | None = field(default=None, repr=False)
    _reaction_du: Callable | None = field(default=None, repr=False)

    @property
    def resolution(self) -> int:
        return self.a_samples.size

    def grid(self, n: int | None = None) -> np.ndarray:
        n = self.resolution if n is None else n
        return np.arange(n) * (self.L / n)

    def reduce(self, x) -> np.ndarray:
        return np.mod(np.asarray(x, dtype=float), self.L)

    # diffusivity -----------------------------------------------------------
    def a(self, x) -> np.ndarray:
        return self._interp(x, 0)

    def a_prime(self, x) -> np.ndarray:
        return self._interp(x, 1)

    def _interp(self, x, deriv: int) -> np.ndarray:
        x = self.reduce(x)
        if self.interp == "cubic":
            xs = np.append(self.grid(), self.L)
            spline = CubicSpline(xs, np.append(self.a_samples, self.a_samples[0]), bc_type="periodic")
            return spline(x, deriv)
        return _trig_eval(self.a_samples, self.L, x, deriv)

    # reaction ----------------------------------------------------------------
    def _hr_coefficient(self, x):
        """b(x) in f = u(1-u)(1+b u) for the built-in families, None otherwise."""
        p = self.params
        if self.family == "kpp_logistic":
            return np.zeros_like(x, dtype=float)
        if self.family == "hadeler_rothe":
            return np.full_like(x, float(p["a_hr"]), dtype=float)
        if self.family == "periodic_hadeler_rothe":
            return p["a0"] + p["a1"] * np.cos(2.0 * np.pi * self.reduce(x) / self.L)
        return None

    def f(self, x, u):
        x, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
        b = self._hr_coefficient(x)
        if b is None:
            return np.asarray(self._reaction(self.reduce(x), u), dtype=float)
        return u * (1.0 + u * ((b - 1.0) - b * u))

    def fu(self, x, u):
        x, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
        b = self._hr_coefficient(x)
        if b is None:
            return np.asarray(self._reaction_du(self.reduce(x), u), dtype=float)
        return 1.0 + u * (2.0 * (b - 1.0) - 3.0 * b * u)

    def bind(self, x) -> LocalReaction:
        return LocalReaction(self, x)

    @property
    def homogeneous(self) -> bool:
        """True when nothing depends on x."""
        return self.family in ("kpp_logistic", "hadeler_rothe") and float(self.params.get("a_amp", 0.0)) == 0.0


@dataclass(frozen=True)
class HolderData:
    alpha: float
    delta: float
    gamma: float


def _trig_eval(samples: np.ndarray, L: float, x: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant of uniform periodic samples."""
    n = samples.size
    coef = np.fft.rfft(samples) / n
    k = np.arange(coef.size)
    weight = np.full(coef.size, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    omega = 2.0 * np.pi * k / L
    c = weight * coef * (1j * omega) ** deriv
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * np.multiply.outer(x, omega))
    return np.real(phase @ c)


def periodic_resample(values: np.ndarray, m: int) -> np.ndarray:
    """Trigonometric resampling of periodic grid values to m points."""
    values = np.asarray(values, dtype=float)
    if values.size == m:
        return values.copy()
    return _trig_eval(values, 1.0, np.arange(m) / m)


def _resolve_params(spec: MediumSpec) -> dict:
    if spec.family not in FAMILIES:
        raise ConfigError(f"unknown family {spec.family!r}", field="family")
    allowed = dict(_COMMON_PARAMS)
    allowed.update(_FAMILY_PARAMS[spec.family])
    unknown = set(spec.params) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown parameters {sorted(unknown)} for {spec.family}", field="params")
    params = {**allowed, **{k: float(v) for k, v in spec.params.items()}}
    for name, value in params.items():
        if value is None:
            raise ConfigError(f"{spec.family} requires parameter {name}", field=name)
    if spec.family == "hadeler_rothe" and params["a_hr"] <= -1.0:
        raise ConfigError("a_hr must exceed -1", field="a_hr")
    if spec.family == "periodic_hadeler_rothe" and params["a0"] - abs(params["a1"]) <= -1.0:
        raise ConfigError("a0 - |a1| must exceed -1", field="a0")
    return params


def make_medium(spec: MediumSpec) -> PeriodicMedium:
    params = _resolve_params(spec)
    if not spec.L > 0:
        raise ConfigError("period L must be positive", field="L")
    if spec.resolution < 16:
        raise ConfigError("resolution must be at least 16 points per period", field="resolution")
    if spec.interp not in ("trig", "cubic"):
        raise ConfigError(f"unknown interpolation rule {spec.interp!r}", field="interp")

    n = int(spec.resolution)
    x = np.arange(n) * (spec.L / n)
    if spec.family == "custom":
        if spec.reaction is None or spec.reaction_du is None:
            raise ConfigError("custom media need reaction and reaction_du callables", field="reaction")
        if spec.diffusivity is not None:
            a_samples = np.asarray(spec.diffusivity(x), dtype=float) * np.ones(n)
        else:
            a_samples = params["a_mean"] + params["a_amp"] * np.cos(2 * np.pi * x / spec.L)
    else:
        a_samples = params["a_mean"] + params["a_amp"] * np.cos(2 * np.pi * x / spec.L)
    a_samples = np.array(a_samples, dtype=float)
    a_samples.setflags(write=False)
    q = float(params.pop("q"))

    medium = PeriodicMedium(
        L=float(spec.L),
        a_samples=a_samples,
        q=q,
        family=spec.family,
        params=params,
        interp=spec.interp,
        c1=0.0,
        c2=0.0,
        _reaction=spec.reaction,
        _reaction_du=spec.reaction_du,
    )
    fine = medium.a(medium.grid(4 * n))
    c1, c2 = float(min(fine.min(), a_samples.min())), float(max(fine.max(), a_samples.max()))
    if c1 <= 0:
        raise EllipticityViolation(f"diffusivity reaches {c1:.3g} <= 0")
    object.__setattr__(medium, "c1", c1)
    object.__setattr__(medium, "c2", c2)

    for state in (0.0, 1.0):
        worst = float(np.max(np.abs(medium.f(x, state))))
        if worst > ZERO_TOL:
            raise ZeroMismatch(f"|f(x,{state:g})| reaches {worst:.3g}")
    return medium


def holder_constants(
    medium: PeriodicMedium,
    n_x: int | None = None,
    n_u: int = 400,
    gamma: float | None = None,
    alpha: float = 1.0,
) -> HolderData:
    """Smallest grid-certified delta (times 1.1) with |f - f_u(x,0)u| <= delta u^(1+alpha) on [0, gamma]."""
    x = medium.grid(n_x)
    fu0 = medium.fu(x, 0.0)
    if np.any(fu0 <= 0):
        raise NotMonostable(f"f_u(x,0) reaches {fu0.min():.3g} <= 0")
    if gamma is None:
        gamma = 1.0 if medium.family == "kpp_logistic" else 0.5
    if not 0 < gamma <= 1 or not 0 < alpha <= 1:
        raise ValueError("need 0 < gamma <= 1 and 0 < alpha <= 1")
    u = np.linspace(0.0, gamma, n_u + 1)[1:]
    X, U = np.meshgrid(x, u, indexing="ij")
    ratio = np.abs(medium.f(X, U) - fu0[:, None] * U) / U ** (1.0 + alpha)
    return HolderData(alpha=alpha, delta=1.1 * float(ratio.max()), gamma=gamma)
