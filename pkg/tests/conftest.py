import re

import numpy as np
import pytest

from adjnorm import dataset as D

_criterion_results: list[tuple[int, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if m:
        _criterion_results.append(
            (int(m.group(1)), m.group(2).replace("_", " "), report.outcome)
        )


def pytest_terminal_summary(terminalreporter):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, outcome in sorted(_criterion_results):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{desc}]: {verdict}")


def make_dataset(
    num_users=20, num_items=15, per_user=6, zipf=1.0, seed=0, kcore=1, split_seed=0
) -> D.InteractionDataset:
    raw = D.synth_powerlaw(num_users, num_items, per_user, zipf, seed=seed)
    raw = D.kcore_filter(raw, kcore)
    return D.split(raw, D.SplitConfig(seed=split_seed, kcore_min=kcore))


@pytest.fixture
def small_ds() -> D.InteractionDataset:
    return make_dataset(num_users=30, num_items=20, per_user=10, seed=1)
