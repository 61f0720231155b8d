import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Echo one verdict line per numbered acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    number = getattr(item.function, "criterion_number", None)
    if number is None:
        return
    line = f"[criterion {number:02d}] {'PASS' if report.passed else 'FAIL'}"
    terminal = item.config.pluginmanager.get_plugin("terminalreporter")
    if terminal is not None:
        terminal.write_line(line)
    else:
        print(line)
