import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO = Path(__file__).parent.parent
CONFIGS = REPO / "configs"


@pytest.fixture(scope="session")
def acceptance_cfg():
    from nelsonlab.cli import parse_config
    return parse_config((CONFIGS / "acceptance.json").read_text())


@pytest.fixture(scope="session")
def identity_p2_cfg():
    from nelsonlab.cli import parse_config
    return parse_config((CONFIGS / "identity_p2.json").read_text())


def config_path(name: str) -> Path:
    return CONFIGS / f"{name}.json"
