#!/usr/bin/env python3
"""Run the four reference sweeps (rate, N, HAP power, radius) into results/.

    python scripts/figures.py --realizations 200 --jobs 4
"""
import sys

from wpccrn.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--config" not in args:
        args = ["--config", "scripts/base.cfg"] + args
    sys.exit(main(["paper-figures"] + args))
