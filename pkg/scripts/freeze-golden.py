#!/usr/bin/env python3
"""Regenerate tests/golden/<subcommand>/ from default-flag runs of the CLI."""
import argparse
import os
import shutil
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from prime_lab import app  # noqa: E402

SUBCOMMANDS = ("ek", "levin", "maxent", "learn")


def freeze(subcommand, golden_dir):
    """Run one subcommand in a scratch directory and copy its reports into golden_dir/subcommand."""
    target = os.path.join(golden_dir, subcommand)
    previous = os.getcwd()
    with tempfile.TemporaryDirectory() as scratch:
        os.chdir(scratch)
        try:
            code = app.run([subcommand, "--out", "golden"])
        finally:
            os.chdir(previous)
        if code != 0:
            print(f"❌ {subcommand} exited with code {code}")
            sys.exit(1)
        shutil.rmtree(target, ignore_errors=True)
        shutil.copytree(os.path.join(scratch, "golden"), target)
    print(f"✅ Golden reports for {subcommand} written to {target}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--golden-dir", default=os.path.join("tests", "golden"), help="Output directory")
    parser.add_argument("subcommands", nargs="*", default=list(SUBCOMMANDS), help="Subcommands to freeze")
    args = parser.parse_args()
    for subcommand in args.subcommands:
        if subcommand not in SUBCOMMANDS:
            print(f"❌ No golden reports for {subcommand}; choose from {', '.join(SUBCOMMANDS)}")
            sys.exit(1)
        freeze(subcommand, os.path.abspath(args.golden_dir))


if __name__ == "__main__":
    main()
