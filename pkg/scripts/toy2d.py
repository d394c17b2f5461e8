#!/usr/bin/env python3
"""2-D comparison of the contrastive flow against the two-flow ratio:
exp(in-distribution score) grids plus ground-truth sample scatter."""
import sys

from cnflow.cli import main

if __name__ == "__main__":
    sys.exit(main(["toy2d", "--out", "runs/toy2d"] + sys.argv[1:]))
