#!/usr/bin/env python3
"""Run the reference mass-drop experiment and print the summary.

Equivalent to `holeflow experiment --j 2 --out-dir <dir>` with the default
configuration (Q = 2 coincident sheets, eps = 0.05, mesh level 5).
"""

import sys
from pathlib import Path

from holeflow.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "experiment_out"
    Path(out).mkdir(parents=True, exist_ok=True)
    rc = main(["experiment", "--j", "2", "--out-dir", out])
    if rc == 0:
        rc = main(["report", "--dir", out])
    sys.exit(rc)
