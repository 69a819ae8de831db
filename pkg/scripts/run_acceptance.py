#!/usr/bin/env python3
"""Run the full acceptance gate and exit 0 iff every criterion passes."""

import sys

from morsegraph.acceptance import run_all

if __name__ == "__main__":
    sys.exit(0 if run_all() else 1)
