from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: dict[int, dict] = {}


def _fmt(value):
    return f"{value:.3e}" if isinstance(value, float) else str(value)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "outcomes": [], "details": []})
    if call.when == "setup" and call.excinfo is not None:
        entry["outcomes"].append((item.name, "error"))
    elif call.when == "call":
        if call.excinfo is None:
            outcome = "xpass" if item.get_closest_marker("xfail") else "pass"
        elif item.get_closest_marker("xfail") and call.excinfo.errisinstance(AssertionError):
            outcome = "known red"
        else:
            outcome = "fail"
        entry["outcomes"].append((item.name, outcome))
        entry["details"].extend(item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        outcomes = entry["outcomes"]
        passed = bool(outcomes) and all(o == "pass" for _, o in outcomes)
        notes = [f"{name}: {o}" for name, o in outcomes if o != "pass"]
        line = f"criterion {number:>2} {entry['title']:<32} {'PASS' if passed else 'FAIL'}"
        if notes:
            line += "  (" + "; ".join(notes) + ")"
        tr.write_line(line)
        for key, value in entry["details"]:
            tr.write_line(f"    {key}: {_fmt(value)}")
