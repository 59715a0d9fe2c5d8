import numpy as np
import pytest

from cfpos.numerics import RngStream


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def np_rng():
    return np.random.default_rng(2024)


def random_hermitian_psd(gen, n):
    a = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    return a @ a.conj().T


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_report(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def report(number, passed, detail, verdict=None):
        verdict = verdict or ("PASS" if passed else "FAIL")
        lines[number] = f"criterion {number:>2}: {verdict}  {detail}"
        print(lines[number])
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
