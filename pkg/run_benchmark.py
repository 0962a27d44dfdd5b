#!/usr/bin/env python
"""Command-line launcher; see `python run_benchmark.py --help`."""
import os
import sys

current_dir = os.path.dirname(os.path.abspath(__file__))
if current_dir not in sys.path:
    sys.path.insert(0, current_dir)

from backend.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
