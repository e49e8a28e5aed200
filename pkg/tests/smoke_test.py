import os
import subprocess
import sys
from pathlib import Path

SRC = Path(__file__).resolve().parent.parent / "src"


def test_cli_runs():
    """Smoke: the program starts without crashing and names itself."""
    env = dict(os.environ, PYTHONPATH=str(SRC))
    r = subprocess.run([sys.executable, "-m", "ppcfkit", "--help"], capture_output=True, text=True, env=env)
    assert r.returncode == 0
    assert "ppcfkit" in (r.stdout + r.stderr).lower()
