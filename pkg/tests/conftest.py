import pytest

from isingqec.lattice import build_layout


@pytest.fixture(scope="session")
def d3():
    return build_layout(3)


@pytest.fixture(scope="session")
def d5():
    return build_layout(5)


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion_report():
    """Collects one ``PASS``/``FAIL`` line per acceptance criterion."""

    def report(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
