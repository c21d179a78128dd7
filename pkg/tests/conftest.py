import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from eulerarnold.spectral import FourierField

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

coefficient = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


@st.composite
def trig_fields(draw, N_max=16, N_min=1, mean_zero=True, nonzero=True):
    N = draw(st.integers(min_value=N_min, max_value=N_max))
    re = draw(st.lists(coefficient, min_size=N + 1, max_size=N + 1))
    im = draw(st.lists(coefficient, min_size=N + 1, max_size=N + 1))
    cpos = np.array(re) + 1j * np.array(im)
    cpos[0] = 0.0 if mean_zero else cpos[0].real
    if nonzero and np.all(np.abs(cpos[1:]) < 1e-3):
        cpos[1] = 1.0
    return FourierField.from_positive(cpos)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the summary table."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
