import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = REPO / "scenarios"

sys.path.insert(0, str(REPO / "tests"))
