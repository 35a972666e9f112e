import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture
def workdir(tmp_path):
    for name in ("scenario_gaussian.json", "scenario_ex.json", "samples_laplace.csv"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    return tmp_path


@pytest.fixture
def gaussian_scenario(workdir):
    return workdir / "scenario_gaussian.json"
