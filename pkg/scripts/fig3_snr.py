"""Regenerate the fig3 experiment as CSV.

Extra arguments are forwarded to ``mid-detect snr``, e.g. ``--trials 100000 --workers 4 --out fig3.csv``.
"""

import sys

from mid_detect.cli import main

if __name__ == "__main__":
    sys.exit(main(["snr", "--preset", "fig3", *sys.argv[1:]]))
