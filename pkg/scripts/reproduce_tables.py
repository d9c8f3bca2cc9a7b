"""Write every reproduction table as CSV under an output directory.

    python scripts/reproduce_tables.py --out results [--extended] [--jobs 2]
"""
import argparse
import time
from pathlib import Path

from chanmagic import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--extended", action="store_true")
    ap.add_argument("--only", nargs="*", default=list(cli.TABLES))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only:
        t0 = time.perf_counter()
        argv = ["reproduce", name, "--format", "csv", "--jobs", args.jobs, "--out", str(out / f"{name}.csv")]
        if args.extended:
            argv.append("--extended")
        code = cli.main(argv)
        print(f"{name:15s} exit {code}  {time.perf_counter() - t0:7.1f} s")


if __name__ == "__main__":
    main()
