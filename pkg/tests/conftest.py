from __future__ import annotations

import pytest

_ACCEPTANCE: dict[int, str] = {}
_INFO: list[str] = []


@pytest.fixture
def acceptance():
    """Recorder for numbered criteria: ``acceptance(k, ok, detail)``."""

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _ACCEPTANCE[k] = line
        print(line)
        return ok

    record.info = lambda text: _INFO.append(text)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
    for text in _INFO:
        terminalreporter.write_line(f"INFO {text}")
