"""Regenerate tests/data/loopback.trace from the demo profile.

Review the diff by hand before committing a regenerated trace.
"""

import argparse
from pathlib import Path

from omapisim.profile import load_profile
from omapisim.scenarios import run_loopback, trace_lines

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profile", default=ROOT / "profiles" / "demo.json")
    parser.add_argument("--out", default=ROOT / "tests" / "data" / "loopback.trace")
    args = parser.parse_args()
    pairs, _ = run_loopback(load_profile(args.profile))
    Path(args.out).write_text("\n".join(trace_lines(pairs)) + "\n")
    print(f"wrote {len(pairs)} frames to {args.out}")


if __name__ == "__main__":
    main()
