import numpy as np
import pytest

from fowtctl import config, study
from fowtctl.fowt_model import PlatformParams
from fowtctl.linearization import find_operating_point, reference_speeds, tuning_speeds
from fowtctl.rotor_aero import RotorGeometry, build_surrogate_surface

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def geom():
    return RotorGeometry()


@pytest.fixture(scope="session")
def surface():
    return build_surrogate_surface()


@pytest.fixture(scope="session")
def platform():
    return PlatformParams()


@pytest.fixture(scope="session")
def ref_ops(geom, surface, platform):
    """Trim points at the 13 whole-m/s reference speeds 12..24."""
    return [find_operating_point(geom, surface, platform, v) for v in reference_speeds()]


@pytest.fixture(scope="session")
def tuning_ops(geom, surface, platform):
    return [find_operating_point(geom, surface, platform, v) for v in tuning_speeds(geom)]


@pytest.fixture(scope="session")
def toolkit():
    return config.ToolkitConfig()


@pytest.fixture(scope="session")
def plant(toolkit):
    return study.plant_from(toolkit)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def schedule_ops(plant, toolkit):
    return study.operating_points(plant, toolkit.controller.tuning_spacing)


@pytest.fixture(scope="session")
def controllers(plant, toolkit, schedule_ops):
    """Controller configurations for every named variant, keyed by name."""
    return {v: study.build_controller(v, plant, toolkit, schedule_ops) for v in config.VARIANTS}
