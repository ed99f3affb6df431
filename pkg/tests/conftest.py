from __future__ import annotations

import pytest

from chronicdx.synthgen import GeneratorConfig, generate_cohort_with_latent


@pytest.fixture(scope="session")
def small_cohort():
    """A 120-participant synthetic cohort without injected violations."""
    cohort, _ = generate_cohort_with_latent(GeneratorConfig(n_participants=120, seed=3))
    return cohort


@pytest.fixture(scope="session")
def small_matrix(small_cohort):
    from chronicdx.features import build_feature_matrix

    return build_feature_matrix(small_cohort, True, 10)


# ----------------------------------------------------------------------------- acceptance report

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one part of a numbered acceptance criterion: ``criterion(n, part, ok, detail)``."""
    results = request.config.stash.setdefault(_CRITERIA, {})

    def record(number: int, part: str, ok: bool, detail: str) -> bool:
        results.setdefault(number, []).append((part, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        parts = results[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"CRITERION {number:>2}: {verdict}")
        for part, ok, detail in parts:
            terminalreporter.write_line(f"    [{'PASS' if ok else 'FAIL'}] {part}: {detail}")
