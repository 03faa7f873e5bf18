import pytest

from crucible.envs.abr import DEFAULT_BITRATES

LADDER = list(DEFAULT_BITRATES)


def abr_inputs(**overrides):
    base = {
        "buffer": 10.0,
        "speed": 1000.0,
        "chunk_len": 4.0,
        "dim": 6.0,
        "last_level": 0.0,
        "chunk_index": 1.0,
        "chunks_left": 46.0,
        "last_download_time": 1.0,
        "last_rebuffer": 0.0,
        "bitrates": LADDER,
        "past_speeds": [1000.0],
        "next_sizes": [b * 500.0 for b in LADDER],
    }
    base.update(overrides)
    return base


def cartpole_inputs(**overrides):
    base = {"x": 0.0, "x_dot": 0.0, "theta": 0.0, "theta_dot": 0.0, "theta_int": 0.0, "step": 0.0}
    base.update(overrides)
    return base


@pytest.fixture
def scripted_patch_file():
    from importlib.resources import files
    return str(files("crucible.algorithms").joinpath("assets/patches/bba_to_bba_c.json"))


# ---- acceptance reporting --------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
