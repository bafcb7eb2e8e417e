import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# One line per acceptance criterion at the end of the run.  The criteria are
# numbered by the test names in test_acceptance.py (test_criterion_<n>_...).
CRITERIA = {
    1: "SMO matches the dense QP oracle on 25 small instances",
    2: "KRR residual <= 1e-8 and planted recovery to 1e-6",
    3: "hyper-Gram PSD up to roundoff, swap symmetry to 1e-12",
    4: "decomposition gap bounded by C^2 Q(pi) / (2 sigma)",
    5: "landmark restriction: u=m exact, u=m/2 within 2x RMSE",
    6: "held-out-pair RMSE <= 0.15 for KRR and SVR at m=20",
    7: "TL1 target yields indefiniteness; ideal target classifies train 100%",
    8: "learning-rate study: negative slope, monotone medians, planted <= 1e-4",
    9: "byte-identical reports modulo timestamp; model round-trip to 1e-14",
}


def _criterion_of(nodeid: str):
    name = nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return None
    try:
        return int(name.split("_")[2])
    except (IndexError, ValueError):
        return None


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            num = _criterion_of(getattr(report, "nodeid", ""))
            if num is not None:
                previous = outcomes.get(num, "PASS")
                outcomes[num] = "PASS" if status == "passed" and previous == "PASS" else "FAIL"
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        verdict = outcomes.get(num, "NOT RUN")
        terminalreporter.write_line(f"criterion {num}: {verdict} - {CRITERIA[num]}")
