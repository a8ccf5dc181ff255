#!/usr/bin/env python3
"""Solver vs brute-force oracle on the seeded N = 2 suite, with timings."""
import sys

from wpccrn.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify"] + sys.argv[1:]))
