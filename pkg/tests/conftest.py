import pytest


@pytest.fixture
def acceptance(request, capsys):
    """Record one PASS/FAIL line per acceptance criterion and echo it live."""
    log = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(name, ok, detail):
        line = f"{name}: {'PASS' if ok else 'FAIL'}  {detail}"
        log.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
