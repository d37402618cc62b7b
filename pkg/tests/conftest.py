import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))  # expose _oracles to tests


def pytest_addoption(parser):
    parser.addoption(
        "--regen-golden",
        action="store_true",
        default=False,
        help="rewrite the golden netlist files instead of comparing",
    )
