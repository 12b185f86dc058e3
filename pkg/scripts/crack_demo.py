#!/usr/bin/env python3
"""Demonstrate the weak element-password keyspace end to end.

Hashes a few passwords into their 194,560-class records, cracks each record
by canonical-candidate enumeration, times the worst case, and estimates the
pairwise collision rate.
"""

import argparse
import random
import sys
import time

sys.path.insert(0, str(__import__("pathlib").Path(__file__).resolve().parents[1] / "src"))

from pws.passwords import (  # noqa: E402
    KEYSPACE,
    ElementPasswordRecord,
    crack_element,
    element_hash,
    make_element_record,
    verify_element,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--passwords", nargs="*", default=["s3cret!", "hunter2", "correct horse"])
    parser.add_argument("--pairs-sample", type=int, default=20_000)
    args = parser.parse_args()

    print(f"element-password keyspace: {KEYSPACE:,} classes\n")
    for password in args.passwords:
        record = make_element_record(password)
        started = time.perf_counter()
        cracked, attempts = crack_element(record)
        elapsed = time.perf_counter() - started
        assert verify_element(record, cracked)
        print(
            f"password {password!r:24} -> class {record.class_index:6d}; "
            f"cracked as {cracked!r} in {attempts:,} attempts ({elapsed:.3f}s)"
        )

    started = time.perf_counter()
    _, attempts = crack_element(ElementPasswordRecord(KEYSPACE - 1))
    print(
        f"\nworst case (last class): {attempts:,} attempts in "
        f"{time.perf_counter() - started:.3f}s"
    )

    n = args.pairs_sample
    rng = random.Random(0)
    buckets: dict[int, int] = {}
    for _ in range(n):
        p = "".join(chr(rng.randint(33, 126)) for _ in range(rng.randint(4, 12)))
        buckets[element_hash(p)] = buckets.get(element_hash(p), 0) + 1
    pairs = n * (n - 1) // 2
    collisions = sum(k * (k - 1) // 2 for k in buckets.values())
    print(
        f"collision rate over {pairs:,} pairs: {collisions / pairs:.3e} "
        f"(ideal 1/{KEYSPACE:,} = {1 / KEYSPACE:.3e})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
