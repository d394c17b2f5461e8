#!/usr/bin/env python3
"""Train the 1-D contrastive flow on N(0,1) vs N(1, sd 2) and compare the
learned density against the analytic truncated difference."""
import sys

from cnflow.cli import main

if __name__ == "__main__":
    sys.exit(main(["toy1d", "--out", "runs/toy1d"] + sys.argv[1:]))
