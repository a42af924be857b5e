from hypothesis import HealthCheck, settings

settings.register_profile("default", suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (status, label, detail); filled by test_acceptance.py
VERDICTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        status, label, detail = VERDICTS[k]
        terminalreporter.write_line(f"criterion {k:>2} {status:<5} {label}: {detail}")
