#!/usr/bin/env python3
"""Run the bundled default experiment config into ./results/default.

Equivalent to: fraclap run --config configs/default.json --out results/default
"""

import pathlib
import sys

from fraclap.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else str(ROOT / "results" / "default")
    sys.exit(main(["run", "--config", str(ROOT / "configs" / "default.json"), "--out", out]))
