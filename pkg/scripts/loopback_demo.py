"""Walk the loopback scenario through the whole stack and print the wire trace.

    python3 scripts/loopback_demo.py [--legacy] [--profile PATH]
"""

import argparse
from pathlib import Path

from omapisim.apdu import bytes_to_hex
from omapisim.profile import load_profile
from omapisim.scenarios import LOOPBACK_APDUS, run_loopback, trace_lines

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description="Print the wire trace of a four-case loopback.")
    parser.add_argument("--profile", default=ROOT / "profiles" / "demo.json")
    parser.add_argument("--legacy", action="store_true", help="baseband without SELECT responses")
    args = parser.parse_args()

    pairs, responses = run_loopback(load_profile(args.profile), legacy_mode=args.legacy)
    for line in trace_lines(pairs):
        print(line)
    print()
    for case, (apdu, response) in enumerate(zip(LOOPBACK_APDUS, responses), 1):
        print(f"case {case}: {bytes_to_hex(apdu):<30} -> {bytes_to_hex(response)}")


if __name__ == "__main__":
    main()
