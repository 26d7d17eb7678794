from __future__ import annotations

from pathlib import Path

import pytest

from repo_fixtures import (
    HAVE_GIT,
    HAVE_HG,
    THREE_COMMITS,
    THREE_COMMITS_WATTS,
    make_repo,
    planted_commits,
    write_profile,
)

DATA = Path(__file__).parent / "data"

needs_git = pytest.mark.skipif(not HAVE_GIT, reason="git executable not available")
needs_hg = pytest.mark.skipif(not HAVE_HG, reason="hg executable not available")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def three_commit_git(tmp_path_factory):
    if not HAVE_GIT:
        pytest.skip("git executable not available")
    root = tmp_path_factory.mktemp("three-git")
    revs = make_repo(root / "repo", "git", THREE_COMMITS)
    profile = write_profile(root / "profile.csv", revs, THREE_COMMITS_WATTS)
    return root / "repo", revs, profile


@pytest.fixture(scope="session")
def three_commit_hg(tmp_path_factory):
    if not HAVE_HG:
        pytest.skip("hg executable not available")
    root = tmp_path_factory.mktemp("three-hg")
    revs = make_repo(root / "repo", "hg", THREE_COMMITS)
    profile = write_profile(root / "profile.csv", revs, THREE_COMMITS_WATTS)
    return root / "repo", revs, profile


@pytest.fixture(scope="session")
def planted_git(tmp_path_factory):
    if not HAVE_GIT:
        pytest.skip("git executable not available")
    root = tmp_path_factory.mktemp("planted-git")
    commits, watts = planted_commits()
    revs = make_repo(root / "repo", "git", commits)
    profile = write_profile(root / "profile.csv", revs, watts)
    return root / "repo", revs, profile


# -- acceptance reporting ------------------------------------------------------

N_CRITERIA = 9
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion.

    Usage: ``criterion(n, ok, detail)`` then assert on ``ok``.
    """

    def record(number: int, ok: bool, detail: str) -> bool:
        prev = ACCEPTANCE_RESULTS.get(number)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}"
        ACCEPTANCE_RESULTS[number] = (ok, detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    ran = [i for i in terminalreporter.stats.get("passed", []) + terminalreporter.stats.get("failed", []) if "test_acceptance" in i.nodeid]
    if not ran and not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        ok, detail = ACCEPTANCE_RESULTS.get(number, (False, "not recorded (test errored, skipped or deselected)"))
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
