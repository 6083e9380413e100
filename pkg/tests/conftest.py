"""Shared media and relaxation runs.  The runs are session-scoped because each costs seconds."""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pulsefront.frontsim import InitialDatum, SimConfig, relax_to_front  # noqa: E402
from pulsefront.medium import MediumSpec, make_medium  # noqa: E402

DYADIC = [0.0] + [2.0**j for j in range(0, 8)]


@pytest.fixture(scope="session")
def kpp():
    return make_medium(MediumSpec("kpp_logistic"))


@pytest.fixture(scope="session")
def hr4():
    return make_medium(MediumSpec("hadeler_rothe", {"a_hr": 4.0}))


@pytest.fixture(scope="session")
def phr():
    return make_medium(MediumSpec("periodic_hadeler_rothe", {"a0": 4.0, "a1": 2.0}))


@pytest.fixture(scope="session")
def hr4_run(hr4):
    return relax_to_front(hr4, InitialDatum("heaviside"), SimConfig(h=1 / 256, width=60, T=80))


@pytest.fixture(scope="session")
def hr4_run_fine(hr4):
    return relax_to_front(hr4, InitialDatum("heaviside"), SimConfig(h=1 / 512, width=40, T=64))


@pytest.fixture(scope="session")
def kpp_run(kpp):
    return relax_to_front(kpp, InitialDatum("heaviside"), SimConfig(h=1 / 32, width=100, T=1000))


@pytest.fixture(scope="session")
def phr_run(phr):
    return relax_to_front(phr, InitialDatum("heaviside"), SimConfig(h=1 / 256, width=60, T=100))


@pytest.fixture(scope="session")
def hr4_exp_runs(hr4):
    """min(1, e^-x) datum at two resolutions, states stored at t = 0 and dyadic times."""
    return {
        h: relax_to_front(hr4, InitialDatum("exponential", 0.0, 1.0), SimConfig(h=h, width=40, T=128), record_times=DYADIC)
        for h in (1 / 128, 1 / 256)
    }


@pytest.fixture(scope="session")
def hr4_step_run(hr4):
    return relax_to_front(hr4, InitialDatum("heaviside"), SimConfig(h=1 / 128, width=40, T=128), record_times=DYADIC)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance")
    for n, name in mod.CRITERIA.items():
        terminalreporter.write_line(mod.RESULTS.get(n, f"acceptance {n:2d} {name:<30} FAIL  (did not complete)"))
