#!/usr/bin/env python3
"""Run every config in configs/ through the CLI and print a one-line status each."""
import argparse
import logging
import sys
import time
from pathlib import Path

from subres import cli

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--skip", nargs="*", default=[], help="config stems to skip")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    configs = sorted((ROOT / "configs").glob("*.toml")) + sorted((ROOT / "configs").glob("*.json"))
    worst = 0
    for cfg in configs:
        if cfg.stem in args.skip:
            continue
        t0 = time.perf_counter()
        code = cli.run(cfg, out_dir=args.out)
        print(f"{cfg.name:28s} exit {code}  {time.perf_counter() - t0:6.2f}s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
