import numpy as np
import pytest

from pinchlab.config import AnalysisConfig
from pinchlab.curvature import curvature_field
from pinchlab.mesh import centroid_recenter
from pinchlab.pinch import analyze
from pinchlab.shapes import Ellipsoid, PerturbedSphere, Sphere, Torus, generate
from pinchlab.spectral import laplace_spectrum


class Case:
    """A recentred mesh with its curvature field and spectrum, computed once."""

    def __init__(self, shape, res):
        self.shape = shape
        self.res = res
        self.mesh = centroid_recenter(generate(shape, res))
        self.curv = curvature_field(self.mesh)
        self._spec = None

    @property
    def spec(self):
        if self._spec is None:
            self._spec = laplace_spectrum(self.mesh)
        return self._spec


_CASES = {}
_REPORTS = {}


def get_case(shape, res):
    key = (shape, res)
    if key not in _CASES:
        _CASES[key] = Case(shape, res)
    return _CASES[key]


def get_report(shape, res, **config):
    key = (shape, res, tuple(sorted(config.items())))
    if key not in _REPORTS:
        _REPORTS[key] = analyze(generate(shape, res), AnalysisConfig(**config))
    return _REPORTS[key]


@pytest.fixture(scope="session")
def unit_sphere():
    return get_case(Sphere(1.0), 4)


@pytest.fixture(scope="session")
def sphere2():
    return get_case(Sphere(2.0), 4)


@pytest.fixture(scope="session")
def ellipsoid():
    return get_case(Ellipsoid(1.0, 1.0, 1.5), 4)


@pytest.fixture(scope="session")
def torus():
    return get_case(Torus(2.0, 0.5), 64)


@pytest.fixture(scope="session")
def perturbed():
    return get_case(PerturbedSphere(0.05), 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


ACCEPTANCE_LINES = []


def record_criterion(number, title, failures, details=""):
    """Store the one-line verdict for an acceptance criterion."""
    status = "PASS" if not failures else "FAIL"
    line = f"criterion {number} [{status}] {title}"
    if details:
        line += f" | {details}"
    if failures:
        line += " | failed: " + "; ".join(failures)
    ACCEPTANCE_LINES.append((number, line))
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
