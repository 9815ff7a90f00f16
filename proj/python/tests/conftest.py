import os
from pathlib import Path

import pytest

SOURCE_DIR = Path(os.environ.get("COCYCLEKIT_SOURCE_DIR", Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def source_dir():
    return SOURCE_DIR


@pytest.fixture(scope="session")
def configs_dir():
    return SOURCE_DIR / "configs"


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("COCYCLEKIT_CLI", "")
    if not path:
        pytest.skip("command-line tool not built")
    return path
