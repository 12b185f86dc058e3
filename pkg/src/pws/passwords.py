"""Two password strengths and a brute-force demonstrator for the weak one.

Workbook-element passwords store only a class index in [0, 194560): every
password in the same class verifies, so an attacker needs at most one
candidate per class. Open-file passwords use a salted, heavily iterated
digest and admit no shortcut short of guessing the exact password.
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass

KEYSPACE = 194_560

OPEN_FILE_ITERATIONS = 1 << 17
_SALT_BYTES = 16


def element_hash(password: str) -> int:
    """Deterministic map of text into [0, KEYSPACE). Frozen: stored in files."""
    h = 0
    for byte in password.encode("utf-8"):
        h = (h * 31 + byte) & 0xFFFFFFFF
    return h % KEYSPACE


@dataclass(frozen=True, slots=True)
class ElementPasswordRecord:
    class_index: int

    def __post_init__(self):
        if not 0 <= self.class_index < KEYSPACE:
            raise ValueError(f"class index {self.class_index} out of range")


@dataclass(frozen=True, slots=True)
class OpenFilePasswordRecord:
    salt: bytes
    digest: bytes
    iterations: int = OPEN_FILE_ITERATIONS


PasswordRecord = ElementPasswordRecord | OpenFilePasswordRecord


def make_element_record(password: str) -> ElementPasswordRecord:
    return ElementPasswordRecord(element_hash(password))


def make_open_file_record(password: str, *, iterations: int = OPEN_FILE_ITERATIONS) -> OpenFilePasswordRecord:
    salt = os.urandom(_SALT_BYTES)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
    return OpenFilePasswordRecord(salt=salt, digest=digest, iterations=iterations)


def verify_element(record: ElementPasswordRecord, password: str) -> bool:
    """True for the original password and for every colliding one."""
    return element_hash(password) == record.class_index


def verify_open_file(record: OpenFilePasswordRecord, password: str) -> bool:
    digest = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), record.salt, record.iterations
    )
    return hmac.compare_digest(digest, record.digest)


def verify_record(record: PasswordRecord, password: str) -> bool:
    if isinstance(record, ElementPasswordRecord):
        return verify_element(record, password)
    return verify_open_file(record, password)


# Canonical preimages: four bytes b1..b4 in [32, 126] give the un-wrapped
# fold value b1*31^3 + b2*31^2 + b3*31 + b4. Working the digits out greedily
# from an anchor v = class + 6*KEYSPACE keeps every digit printable, so each
# class has an O(1) deterministic representative.
_ANCHOR = 6 * KEYSPACE


def canonical_password(class_index: int) -> str:
    """The canonical 4-character preimage for a class; printable ASCII."""
    if not 0 <= class_index < KEYSPACE:
        raise ValueError(f"class index {class_index} out of range")
    v = class_index + _ANCHOR
    b1 = (v - 31_776) // 29_791          # leave [31776, 125118] for 3 bytes
    r = v - b1 * 29_791
    b2 = (r - 1_024) // 961              # leave [1024, 4032] for 2 bytes
    r -= b2 * 961
    b3 = (r - 32) // 31                  # leave [32, 126] for the last byte
    b4 = r - b3 * 31
    return bytes((b1, b2, b3, b4)).decode("ascii")


def crack_element(record: ElementPasswordRecord) -> tuple[str, int]:
    """Enumerate one canonical candidate per class until one verifies.

    Returns (password, attempts). Total: at most KEYSPACE attempts. There is
    no analogous shortcut for open-file records.
    """
    if not isinstance(record, ElementPasswordRecord):
        from .errors import Infeasible

        raise Infeasible("open-file records admit no collision-class search")
    for class_index in range(KEYSPACE):
        candidate = canonical_password(class_index)
        if verify_element(record, candidate):
            return candidate, class_index + 1
    raise AssertionError("unreachable: every class has a canonical preimage")
