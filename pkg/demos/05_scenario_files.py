"""Driving the command line tool with a scenario file.

A scenario names a law, the statistics to simulate and the tests to run.
Re-running it with the same seed reproduces every statistic bit for bit.
The exit code is 0 when all tests pass and 1 when any fails.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

scenario = {
    "law": "beta(1,1)",
    "statistics": ["L", "Z"],
    "n": [1000],
    "replicates": 50000,
    "seed": 42,
    "tests": [
        {"statistic": "L", "n": 1000, "kind": "chi_square", "target": "geometric:0.5"},
        {"statistic": "L", "n": 1000, "kind": "chi_square", "target": "geometric:0.6"},
        {"statistic": "Z", "n": 1000, "kind": "chi_square", "target": "exact"},
    ],
}

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "uniform.json"
    path.write_text(json.dumps(scenario, indent=2))
    report = Path(tmp) / "report.jsonl"
    cmd = [sys.executable, "-m", "sievelab", "verify", "--scenario", str(path),
           "--report", str(report)]
    run = subprocess.run(cmd, capture_output=True, text=True)
    print(run.stdout)
    print(f"exit code {run.returncode} (the geometric(0.6) target is wrong on purpose)")
    first = report.read_bytes()
    subprocess.run(cmd, capture_output=True)
    print("second run reproduces the report byte for byte:", first == report.read_bytes())
