import sys
from pathlib import Path

# Modules under q2sat/ import each other by bare name
sys.path.insert(0, str(Path(__file__).parent / "q2sat"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: heavier property sweeps")
