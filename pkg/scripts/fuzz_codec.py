"""Throughput and robustness run for the OEM-hook codec.

Encodes/decodes random requests and throws random byte strings at the
decoder, then prints a histogram of decoder outcomes.
"""

import argparse
import random
import time
from collections import Counter

from omapisim.oemhook import (
    CloseChannel, Exchange, GetAtr, OemHookError, OpenChannel, decode_request, encode_request,
)


def random_request(rng):
    kind = rng.randrange(4)
    if kind == 0:
        return GetAtr()
    if kind == 1:
        return OpenChannel(rng.randbytes(rng.randrange(0, 33)))
    if kind == 2:
        return CloseChannel(rng.getrandbits(32))
    p3 = rng.choice([None, rng.randrange(256)])
    data = b"" if p3 is None else rng.randbytes(rng.randrange(0, 262))
    return Exchange(rng.getrandbits(32), *rng.randbytes(4), p3=p3, data=data)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-n", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    rng = random.Random(args.seed)

    start = time.perf_counter()
    for _ in range(args.n):
        req = random_request(rng)
        if decode_request(encode_request(req)) != req:
            raise SystemExit(f"round trip failed for {req!r}")
    elapsed = time.perf_counter() - start
    print(f"round trip: {args.n} requests in {elapsed:.2f}s ({args.n / elapsed:,.0f}/s)")

    outcomes = Counter()
    for _ in range(args.n):
        raw = rng.randbytes(rng.randrange(0, 24))
        try:
            outcomes[type(decode_request(raw)).__name__] += 1
        except OemHookError as exc:
            outcomes[type(exc).__name__] += 1
    for name, count in outcomes.most_common():
        print(f"{name:20} {count}")


if __name__ == "__main__":
    main()
