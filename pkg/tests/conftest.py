import numpy as np
import pytest

from gaussprice.covparam import SymMatrix, omega_unpack, sigma_alpha

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number, title = getattr(report, "acceptance", (None, None))
    if number is None:
        return
    # a parametrized criterion passes only if every case passes
    previous = _ACCEPTANCE.get(number, (title, "PASS"))[1]
    ok = report.passed and previous == "PASS"
    _ACCEPTANCE[number] = (title, "PASS" if ok else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        outcome.get_result().acceptance = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[number]
        terminalreporter.write_line(f"AC{number} {verdict}: {title}")


def random_spd(rng, n, ridge=0.5):
    B = rng.standard_normal((n, n))
    S = B @ B.T / n + ridge * np.eye(n)
    return 0.5 * (S + S.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def coords_half():
    return omega_unpack(sigma_alpha(0.5))


@pytest.fixture
def coords_identity():
    return omega_unpack(SymMatrix(np.eye(2)))
