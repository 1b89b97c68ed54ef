"""Regenerate the fig2 experiment as CSV.

Extra arguments are forwarded to ``mid-detect roc``, e.g. ``--trials 100000 --workers 4 --out fig2.csv``.
"""

import sys

from mid_detect.cli import main

if __name__ == "__main__":
    sys.exit(main(["roc", "--preset", "fig2", *sys.argv[1:]]))
