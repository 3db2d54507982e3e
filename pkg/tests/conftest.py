import os

# pin BLAS threading before numpy loads so the O(n^2) timing tests scale cleanly
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest  # noqa: E402


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and rep.when == "call":
        num, desc = marker.args
        verdict = "PASS" if rep.passed else "FAIL"
        # one visible line per acceptance criterion, independent of capture
        item.config.get_terminal_writer().line(
            f"\nACCEPTANCE CRITERION {num} ({desc}): {verdict}")
