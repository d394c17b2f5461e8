#!/usr/bin/env python3
"""Contaminated-contrastive sweep on synthetic clusters: AUROC per method
and mixture fraction, with sd over repetitions."""
import sys

from cnflow.cli import main

if __name__ == "__main__":
    sys.exit(main(["mu-sweep", "--out", "runs/mu_sweep"] + sys.argv[1:]))
