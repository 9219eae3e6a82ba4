"""Shared pytest plumbing: the acceptance suite records one line per
criterion and this hook prints them after the run, where output capture
cannot swallow them."""

_criterion_lines = []


def record_criterion(number: int, name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    _criterion_lines.append((number, f"criterion {number:2d} {name}: "
                                     f"{status}{suffix}"))


def record_observation(number: int, text: str):
    _criterion_lines.append((number, f"criterion {number:2d} note: {text}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criterion_lines, key=lambda t: t[0]):
        terminalreporter.write_line(line)
