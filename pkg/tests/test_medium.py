import numpy as np
import pytest

from pulsefront.errors import ConfigError, EllipticityViolation, NotMonostable, ZeroMismatch
from pulsefront.medium import MediumSpec, holder_constants, make_medium, periodic_resample

X = np.arange(64) / 64
U = np.linspace(0.0, 1.0, 101)


def test_kpp_linearization_is_one(kpp):
    assert np.array_equal(kpp.fu(X, 0.0), np.ones_like(X))
    assert np.allclose(kpp.a(X), 1.0) and kpp.q == 0.0


def test_hadeler_rothe_polynomial(hr4):
    xx, uu = np.meshgrid(X, U)
    assert np.allclose(hr4.f(xx, uu), uu * (1 - uu) * (1 + 4 * uu), atol=1e-15)
    assert np.allclose(hr4.fu(X, 0.0), 1.0)
    assert np.allclose(hr4.fu(X, 1.0), -5.0)


def test_periodic_hadeler_rothe_vanishes_at_one(phr):
    b = 4 + 2 * np.cos(2 * np.pi * X)
    xx, uu = np.meshgrid(X, U, indexing="ij")
    assert np.allclose(phr.f(xx, uu), uu * (1 - uu) * (1 + b[:, None] * uu), atol=1e-14)
    assert np.max(np.abs(phr.f(X, 1.0))) <= 1e-15


def test_fu_matches_finite_difference(phr):
    u = np.linspace(0.05, 0.95, 19)
    xx, uu = np.meshgrid(X, u)
    d = 1e-6
    fd = (phr.f(xx, uu + d) - phr.f(xx, uu - d)) / (2 * d)
    assert np.allclose(phr.fu(xx, uu), fd, atol=1e-8)


def test_evaluators_are_pure(phr):
    x = np.random.default_rng(0).uniform(-3, 3, 200)
    u = np.random.default_rng(1).uniform(-0.1, 1.1, 200)
    assert np.array_equal(phr.f(x, u), phr.f(x, u))
    assert np.array_equal(phr.a(x), phr.a(x))


@pytest.mark.parametrize("interp", ["trig", "cubic"])
def test_periodic_extension(interp):
    med = make_medium(MediumSpec("periodic_hadeler_rothe", {"a0": 4, "a1": 2, "a_amp": 0.3}, interp=interp))
    x = np.arange(-128, 128) / 32  # dyadic points reduce exactly
    assert np.array_equal(med.a(x + med.L), med.a(x))
    assert np.array_equal(med.f(x + med.L, 0.3), med.f(x, 0.3))
    y = np.random.default_rng(2).uniform(0, 1, 50)
    assert np.allclose(med.a(y + 3 * med.L), med.a(y), atol=1e-12)


def test_trig_interpolant_is_exact_for_band_limited_diffusivity():
    med = make_medium(MediumSpec("kpp_logistic", {"a_amp": 0.5}))
    y = np.linspace(0, 1, 37)
    assert np.allclose(med.a(y), 1 + 0.5 * np.cos(2 * np.pi * y), atol=1e-13)
    assert np.allclose(med.a_prime(y), -np.pi * np.sin(2 * np.pi * y), atol=1e-12)
    assert med.c1 == pytest.approx(0.5) and med.c2 == pytest.approx(1.5)


def test_periodic_resample_round_trip():
    v = 1 + 0.25 * np.sin(2 * np.pi * np.arange(32) / 32)
    assert np.allclose(periodic_resample(periodic_resample(v, 96), 32), v, atol=1e-13)


def test_homogeneous_flag(kpp, hr4, phr):
    assert kpp.homogeneous and hr4.homogeneous and not phr.homogeneous


@pytest.mark.parametrize(
    "spec, field",
    [
        (MediumSpec("bistable"), "family"),
        (MediumSpec("hadeler_rothe"), "a_hr"),
        (MediumSpec("kpp_logistic", {"a_hr": 2.0}), "params"),
        (MediumSpec("hadeler_rothe", {"a_hr": -1.5}), "a_hr"),
        (MediumSpec("kpp_logistic", L=0.0), "L"),
        (MediumSpec("kpp_logistic", interp="linear"), "interp"),
        (MediumSpec("custom"), "reaction"),
    ],
)
def test_config_errors_name_the_field(spec, field):
    with pytest.raises(ConfigError) as info:
        make_medium(spec)
    assert info.value.field == field


def test_ellipticity_violation():
    with pytest.raises(EllipticityViolation):
        make_medium(MediumSpec("kpp_logistic", {"a_amp": 1.2}))


def test_zero_mismatch_for_custom_reaction():
    spec = MediumSpec("custom", reaction=lambda x, u: u * (1.1 - u), reaction_du=lambda x, u: 1.1 - 2 * u)
    with pytest.raises(ZeroMismatch):
        make_medium(spec)


def test_custom_medium_matches_builtin(hr4):
    spec = MediumSpec(
        "custom",
        reaction=lambda x, u: u * (1 - u) * (1 + 4 * u),
        reaction_du=lambda x, u: 1 + 6 * u - 12 * u**2,
        diffusivity=lambda x: np.ones_like(x),
    )
    med = make_medium(spec)
    assert np.allclose(med.f(X, 0.3), hr4.f(X, 0.3)) and np.allclose(med.fu(X, 0.3), hr4.fu(X, 0.3))


def test_holder_requires_positive_linearization():
    spec = MediumSpec("custom", reaction=lambda x, u: -u * (1 - u), reaction_du=lambda x, u: -1 + 2 * u)
    with pytest.raises(NotMonostable):
        holder_constants(make_medium(spec))


def test_holder_kpp(kpp):
    data = holder_constants(kpp)
    assert (data.alpha, data.gamma) == (1.0, 1.0)
    assert data.delta == pytest.approx(1.1, rel=1e-12)


def test_holder_hr4_against_brute_force(hr4):
    data = holder_constants(hr4)
    assert data.gamma == 0.5
    # |f(u) - u| / u^2 = |3 - 4u|; the scan starts one grid step above 0
    assert data.delta == pytest.approx(1.1 * (3 - 4 * 0.5 / 400), rel=1e-12)
    assert 1.1 * 2.9 < data.delta <= 1.1 * 3.0


def test_holder_recheck_at_four_times_resolution(phr):
    data = holder_constants(phr)
    x = np.arange(256) / 256
    u = np.linspace(0, data.gamma, 1601)[1:]
    b = 4 + 2 * np.cos(2 * np.pi * x)[:, None]
    f = u * (1 - u) * (1 + b * u)
    worst = np.max(np.abs(f - u) / u**2)
    assert worst <= data.delta
    assert data.delta == pytest.approx(1.1 * worst, rel=2e-3)
