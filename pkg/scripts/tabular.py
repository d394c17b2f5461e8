#!/usr/bin/env python3
"""Tabular experiment: flow methods with a marginal-permutation
contrastive set on correlated synthetic data (or a labeled CSV via
--config)."""
import sys

from cnflow.cli import main

if __name__ == "__main__":
    sys.exit(main(["tabular", "--out", "runs/tabular"] + sys.argv[1:]))
