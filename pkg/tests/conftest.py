import pytest

from searchlab import tasks, world

# Criterion verdict lines collected by tests/test_acceptance.py; echoed in a
# summary section so they survive pytest's output capture.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_scene():
    return world.generate_scene(3)


@pytest.fixture(scope="session")
def objectnav_pair(small_scene):
    scene, episodes = tasks.generate_episodes(small_scene, tasks.OBJECTNAV, 3, seed=11)
    return scene, episodes[0]


@pytest.fixture(scope="session")
def pickplace_pair(small_scene):
    scene, episodes = tasks.generate_episodes(small_scene, tasks.PICKPLACE, 3, seed=11)
    return scene, episodes[0]
