import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hesilab import ControlSystem
from hesilab.verify import _cplx, random_unitary

settings.register_profile("pkg", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")

CRITERIA: dict[int, tuple[bool, str]] = {}


def record(k: int, ok: bool, detail: str = "") -> None:
    CRITERIA[k] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def normal_system(rng, n_lo=2, n_hi=5, m_hi=2) -> ControlSystem:
    n = int(rng.integers(n_lo, n_hi + 1))
    m = int(rng.integers(1, m_hi + 1))
    U = random_unitary(rng, n)
    d = rng.uniform(-2, 1, n) + 1j * rng.uniform(-3, 3, n)
    return ControlSystem(U @ np.diag(d) @ U.conj().T, _cplx(rng, n, m))


def random_pair(rng, n_lo=1, n_hi=6, m_hi=2) -> ControlSystem:
    n = int(rng.integers(n_lo, n_hi + 1))
    m = int(rng.integers(1, m_hi + 1))
    return ControlSystem(0.7 * _cplx(rng, n, n), _cplx(rng, n, m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
