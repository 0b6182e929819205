import contextlib

import pytest

_VERDICTS = []


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL line per acceptance criterion."""

    @contextlib.contextmanager
    def record(number, title):
        line = f"criterion {number}: {title}"
        notes = []
        try:
            yield notes.append
        except BaseException as exc:
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            _VERDICTS.append((number, f"FAIL {line} ({reason})", notes))
            print(_VERDICTS[-1][1])
            raise
        _VERDICTS.append((number, f"PASS {line}", notes))
        print(_VERDICTS[-1][1])

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line, notes in sorted(_VERDICTS, key=lambda v: v[0]):
            terminalreporter.write_line(line)
            for note in notes:
                terminalreporter.write_line(f"    {note}")
