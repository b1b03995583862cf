"""Run every pipeline for the contracted, super honeycomb and dilated layouts.

Usage: python scripts/run_all.py [--out DIR] [--config FILE]
"""

import argparse
import sys

from superhex.cli import COMMANDS, main


def run(out: str, config: str | None) -> int:
    worst = 0
    for sigma in (-0.1, 0.0, 0.1):
        for cmd in COMMANDS:
            if cmd == "fold" and sigma != 0:
                continue  # folding needs the sub-lattice symmetry
            if cmd == "cone" and sigma != 0:
                continue  # the cone only exists without deformation
            argv = [cmd, "--out", out, "--sigma", str(sigma)]
            if config:
                argv += ["--config", config]
            worst = max(worst, main(argv))
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out")
    p.add_argument("--config", default=None)
    a = p.parse_args()
    sys.exit(run(a.out, a.config))
