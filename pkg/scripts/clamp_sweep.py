#!/usr/bin/env python3
"""Retrain the 1-D toy for a list of clamp thresholds and report the
total-variation distance to both the truncated difference and the plain
inlier density."""
import sys

from cnflow.cli import main

if __name__ == "__main__":
    sys.exit(main(["clamp-sweep", "--out", "runs/clamp_sweep"] + sys.argv[1:]))
