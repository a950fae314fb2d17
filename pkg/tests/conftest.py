import numpy as np
import pytest
from hypothesis import settings

import mdsfeat
import mdsfeat.cli
import mdsfeat.evaluation
import mdsfeat.experiments
import mdsfeat.mds

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# every ILMA trace produced anywhere in the session: (n_items, stresses)
ILMA_RUNS = []
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_original_ilma_fit = mdsfeat.mds.ilma_fit


def _recording_ilma_fit(d, m, options=None):
    emb, trace = _original_ilma_fit(d, m, options)
    ILMA_RUNS.append((np.shape(d)[0], trace.stresses.copy()))
    return emb, trace


# patched at import so test modules doing `from mdsfeat.mds import ilma_fit` get the recorder too
for _mod in (mdsfeat, mdsfeat.mds, mdsfeat.cli, mdsfeat.evaluation, mdsfeat.experiments):
    _mod.ilma_fit = _recording_ilma_fit


def monotone_violations(runs, slack=1e-9):
    bad = 0
    for _, s in runs:
        bad += int(np.sum(s[1:] > s[:-1] + slack * s[1:]))
    return bad


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    if ILMA_RUNS:
        bad = monotone_violations(ILMA_RUNS)
        verdict = "PASS" if bad == 0 else "FAIL"
        terminalreporter.write_line(
            f"[{verdict}] C2 (whole session) monotone stress: {len(ILMA_RUNS)} ILMA runs, {bad} sweep violations"
        )
