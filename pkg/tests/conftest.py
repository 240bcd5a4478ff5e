import pytest

CRITERIA = {
    1: "strong subadditivity",
    2: "fidelity of recovery >= 2^(-I/2)",
    3: "classical identity D(rho||sigma) = I(A:C|B)",
    4: "trace-distance corollary and converse",
    5: "one-shot duality, rescaling, DH bounds",
    6: "AEP of D_H via type classes",
    7: "typicality: normalization, |S_n|, decay",
    8: "de Finetti witnesses and twirls",
    9: "fidelity lemma suite",
    10: "k-extendible approximation and squashed bounds",
    11: "CLI determinism",
}

_results: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or "criterion" not in marker.kwargs:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _results.setdefault(marker.kwargs["criterion"], []).append((item.name, report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        entries = _results.get(n)
        if not entries:
            continue
        status = "PASS" if all(ok for _, ok, _ in entries) else "FAIL"
        details = " | ".join(d for _, _, d in entries if d)
        line = f"criterion {n:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{details}]" if details else ""))
