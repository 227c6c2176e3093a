import pytest

from xgcvqa import fixtures


@pytest.fixture(scope="session")
def fixture_model():
    return fixtures.fixture_model()


@pytest.fixture(scope="session")
def ablation_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ablation")
    fixtures.write_ablation_dataset(out, n_each=20)
    return out


@pytest.fixture(scope="session")
def calibration_dirs(tmp_path_factory):
    front = tmp_path_factory.mktemp("cal_front")
    sym = tmp_path_factory.mktemp("cal_sym")
    fixtures.write_calibration_dataset(front, front_degraded=True)
    fixtures.write_calibration_dataset(sym, front_degraded=False)
    return front, sym


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
