#!/usr/bin/env python3
"""Run the test suite under coverage and enforce the pyproject threshold."""

import subprocess
import sys


def run_coverage() -> bool:
    """Run pytest under coverage, then ``coverage report``.

    The threshold is ``fail_under`` in ``[tool.coverage.report]``.

    Returns:
        True when the tests pass and coverage meets the threshold.
    """
    steps = [
        [sys.executable, "-m", "coverage", "run", "-m", "pytest"],
        [sys.executable, "-m", "coverage", "report"],
    ]
    for step in steps:
        result = subprocess.run(step, capture_output=True, text=True)
        print(result.stdout)
        if result.returncode != 0:
            print(f"❌ {' '.join(step[2:])} failed (exit {result.returncode})")
            if result.stderr:
                print(result.stderr)
            return False
    print("✅ coverage threshold met")
    return True


if __name__ == "__main__":
    sys.exit(0 if run_coverage() else 1)
