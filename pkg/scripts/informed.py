#!/usr/bin/env python3
"""Informed sweep: known outliers mixed into the contrastive set."""
import sys

from cnflow.cli import main

if __name__ == "__main__":
    sys.exit(main(["informed", "--out", "runs/informed"] + sys.argv[1:]))
