"""Seedable deterministic randomness.

Every random draw in the package flows through an explicit DeterministicRng
handle; nothing reads ambient entropy. The generator is SHA-256 in counter
mode, which is overkill for simulation scheduling and exactly right for key
material: one primitive everywhere keeps runs reproducible from a single seed.

Subclassing random.Random buys the stdlib's unbiased randrange / choice /
shuffle / sample on top of the deterministic core.
"""

from __future__ import annotations

import hashlib
import random


def _seed_bytes(seed: int | bytes | str) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, str):
        return seed.encode("utf-8")
    if isinstance(seed, int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        return seed.to_bytes((seed.bit_length() + 7) // 8 or 1, "big")
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


class DeterministicRng(random.Random):
    """SHA-256 counter-mode generator behind the random.Random interface."""

    def __init__(self, seed: int | bytes | str, label: bytes | str = b""):
        self._label = _seed_bytes(label) if not isinstance(label, bytes) else label
        super().__init__(seed)

    def seed(self, a=None, version=2):  # noqa: D102 - stdlib override
        if a is None:
            raise ValueError("DeterministicRng requires an explicit seed")
        material = _seed_bytes(a)
        h = hashlib.sha256()
        h.update(b"drbg-v1")
        h.update(len(material).to_bytes(4, "big"))
        h.update(material)
        h.update(len(self._label).to_bytes(4, "big"))
        h.update(self._label)
        self._key = h.digest()
        self._counter = 0
        self._buffer = b""

    def fork(self, label: bytes | str) -> "DeterministicRng":
        """Derive an independent child stream; the parent is unaffected.

        Children are keyed by (parent key, label), not by stream position, so
        a fork taken before or after other draws yields the same child.
        """
        return DeterministicRng(self._key, label=_seed_bytes(label))

    def randbytes(self, n: int) -> bytes:
        while len(self._buffer) < n:
            block = hashlib.sha256(
                self._key + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def getrandbits(self, k: int) -> int:
        if k < 0:
            raise ValueError("number of bits must be non-negative")
        if k == 0:
            return 0
        nbytes = (k + 7) // 8
        return int.from_bytes(self.randbytes(nbytes), "big") >> (8 * nbytes - k)

    def random(self) -> float:
        return self.getrandbits(53) * 2.0**-53

    def getstate(self):
        return (self._key, self._counter, self._buffer)

    def setstate(self, state):
        self._key, self._counter, self._buffer = state
